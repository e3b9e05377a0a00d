#include "fte/synthesis.hpp"

#include "fte/error.hpp"
#include "fte/text_io.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <random>
#include <stdexcept>
#include <system_error>
#include <thread>

namespace fte {
namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

// Below these bound/std ratios the rejection rate explodes and the truncated
// normal is indistinguishable from a uniform on the bounded set.
constexpr double kMinRatio1d = 1e-3;
constexpr double kMinRatioBall = 0.1;

double truncated_normal(std::mt19937_64& rng, double std, double bound) {
  if (std == 0.0 || bound == 0.0) {
    return 0.0;
  }
  if (bound / std < kMinRatio1d) {
    return std::uniform_real_distribution<double>(-bound, bound)(rng);
  }
  std::normal_distribution<double> normal(0.0, std);
  while (true) {
    const double x = normal(rng);
    if (std::abs(x) <= bound) {
      return x;
    }
  }
}

Vec3 truncated_normal_ball(std::mt19937_64& rng, double std, double bound) {
  if (std == 0.0 || bound == 0.0) {
    return Vec3::Zero();
  }
  if (bound / std < kMinRatioBall) {
    std::uniform_real_distribution<double> u(-bound, bound);
    while (true) {
      const Vec3 x(u(rng), u(rng), u(rng));
      if (x.norm() <= bound) {
        return x;
      }
    }
  }
  std::normal_distribution<double> normal(0.0, std);
  while (true) {
    const Vec3 x(normal(rng), normal(rng), normal(rng));
    if (x.norm() <= bound) {
      return x;
    }
  }
}

bool valid_distribution(const BoundaryDistribution& d) {
  const auto ok = [](double v) { return std::isfinite(v) && v >= 0.0; };
  for (int i = 0; i < 3; ++i) {
    if (!ok(d.translation_std[i]) || !ok(d.translation_bound[i])) {
      return false;
    }
  }
  return ok(d.rotation_std) && ok(d.rotation_bound);
}

const Pose& boundary_pose(const Trajectory& demo, std::size_t boundary) {
  return demo[demo.splits()[boundary]].pose;
}

// Demo gripper value at the given fraction of segment k, held from the last
// sample at or before that time.
double gripper_at(const Trajectory& demo, std::size_t k, double fraction) {
  const std::size_t first = demo.splits()[k];
  const std::size_t last = demo.splits()[k + 1];
  const double t0 = demo[first].time;
  const double t = t0 + fraction * (demo[last].time - t0);
  std::size_t i = first;
  while (i < last && demo[i + 1].time <= t) {
    ++i;
  }
  return demo[i].gripper;
}

RolloutRecord run_rollout(const SynthesisJob& job, const SynthesisResult& fitted,
                          std::size_t index) {
  RolloutRecord record;
  record.index = index;
  const Trajectory& demo = job.demo;
  const std::size_t segments = demo.segment_count();

  std::vector<Pose> boundaries;
  boundaries.reserve(segments + 1);
  for (std::size_t b = 0; b <= segments; ++b) {
    Pose pose = boundary_pose(demo, b);
    if (job.perturbation.is_perturbable(b)) {
      const BoundaryPerturbation p = sample_boundary_perturbation(job.perturbation, b, index);
      pose = perturb_pose(pose, p);
      record.perturbations.push_back(p);
    }
    boundaries.push_back(pose);
  }
  record.segment_goals.assign(boundaries.begin() + 1, boundaries.end());

  RolloutOptions options;
  options.dt = job.dt;
  options.horizon_factor = job.horizon_factor;

  std::vector<Sample> samples;
  std::vector<std::size_t> splits{0};
  Pose start = boundaries.front();
  double time_offset = 0.0;
  try {
    for (std::size_t k = 0; k < segments; ++k) {
      const DmpModel& model = fitted.models[k];
      const RolloutResult result =
          job.obstacle_enabled
              ? coupled_rollout(model, start, boundaries[k + 1], *job.scene, job.obstacle, options)
              : rollout_states(model, start, boundaries[k + 1], options);
      const auto& out = result.trajectory.samples();
      const std::size_t n_last = out.size() - 1;
      for (std::size_t n = (k == 0 ? 0 : 1); n <= n_last; ++n) {
        Sample s = out[n];
        s.time += time_offset;
        s.gripper = gripper_at(demo, k, static_cast<double>(n) / static_cast<double>(n_last));
        samples.push_back(s);
      }
      splits.push_back(samples.size() - 1);
      start = out.back().pose;
      time_offset = samples.back().time;
    }
    record.trajectory = Trajectory(std::move(samples), std::move(splits));
  } catch (const Error& e) {
    record.status = RolloutStatus::kFailed;
    record.error = e.what();
    return record;
  }

  EvalOptions eval;
  eval.scene = job.scene.get();
  eval.rho_th = job.evaluation_threshold();
  record.report = evaluate_rollout(demo, record.trajectory, eval, rollout_file_name(index));
  return record;
}

nlohmann::json vec_json(const Vec3& v) { return {v.x(), v.y(), v.z()}; }

nlohmann::json quat_json(const UnitQuaternion& q) { return {q.w(), q.x(), q.y(), q.z()}; }

nlohmann::json pose_json(const Pose& p) {
  return {{"position", vec_json(p.position)}, {"orientation", quat_json(p.orientation)}};
}

nlohmann::json distribution_json(const BoundaryDistribution& d) {
  return {{"translation_std", vec_json(d.translation_std)},
          {"translation_bound", vec_json(d.translation_bound)},
          {"rotation_std", d.rotation_std},
          {"rotation_bound", d.rotation_bound}};
}

}  // namespace

const BoundaryDistribution& PerturbationSpec::distribution_for(std::size_t boundary) const {
  const auto it = overrides.find(boundary);
  return it == overrides.end() ? distribution : it->second;
}

bool PerturbationSpec::is_perturbable(std::size_t boundary) const {
  if (perturbable.empty()) {
    return boundary != 0;
  }
  return boundary < perturbable.size() && perturbable[boundary];
}

void PerturbationSpec::validate() const {
  if (!valid_distribution(distribution)) {
    throw std::invalid_argument("perturbation: stds and bounds must be finite and >= 0");
  }
  for (const auto& [boundary, d] : overrides) {
    if (!valid_distribution(d)) {
      throw std::invalid_argument("perturbation.overrides." + std::to_string(boundary) +
                                  ": stds and bounds must be finite and >= 0");
    }
  }
}

BoundaryPerturbation sample_boundary_perturbation(const PerturbationSpec& spec,
                                                  std::size_t boundary,
                                                  std::size_t rollout_index) {
  const BoundaryDistribution& d = spec.distribution_for(boundary);
  const std::uint64_t key =
      splitmix64(splitmix64(spec.seed) ^ splitmix64(rollout_index) * 31 ^ splitmix64(~boundary));
  std::mt19937_64 rng(key);
  BoundaryPerturbation p;
  p.boundary = boundary;
  for (int i = 0; i < 3; ++i) {
    p.dp[i] = truncated_normal(rng, d.translation_std[i], d.translation_bound[i]);
  }
  p.dq = quat_exp(truncated_normal_ball(rng, d.rotation_std, d.rotation_bound));
  return p;
}

Pose perturb_pose(const Pose& pose, const BoundaryPerturbation& perturbation) {
  return {pose.position + perturbation.dp, pose.orientation * perturbation.dq};
}

void SynthesisJob::validate() const {
  if (demo.segment_count() == 0) {
    throw std::invalid_argument("demo: trajectory has no segments");
  }
  if (n_demos < 1) {
    throw std::invalid_argument("rollout.n_demos must be >= 1");
  }
  if (!(dt > 0.0) || !std::isfinite(dt)) {
    throw std::invalid_argument("rollout.dt must be > 0");
  }
  if (!(horizon_factor >= 1.0) || !std::isfinite(horizon_factor)) {
    throw std::invalid_argument("rollout.horizon_factor must be >= 1");
  }
  if (obstacle_enabled && !scene) {
    throw std::invalid_argument("obstacle.enabled requires a scene");
  }
  if (collision_rho_th && !(*collision_rho_th > 0.0)) {
    throw std::invalid_argument("metrics.rho_th must be > 0");
  }
  obstacle.validate();
  perturbation.validate();
  for (std::size_t k = 0; k < demo.segment_count(); ++k) {
    const std::size_t first = demo.splits()[k];
    const std::size_t last = demo.splits()[k + 1];
    const double tau = demo[last].time - demo[first].time;
    if (dt > tau / 50.0) {
      throw std::invalid_argument("rollout.dt exceeds 1/50 of segment " + std::to_string(k) +
                                  " duration");
    }
  }
}

std::size_t SynthesisResult::failed_count() const {
  return static_cast<std::size_t>(std::count_if(rollouts.begin(), rollouts.end(), [](const auto& r) {
    return r.status == RolloutStatus::kFailed;
  }));
}

SynthesisResult synthesize(const SynthesisJob& job) {
  job.validate();
  SynthesisResult result;
  for (std::size_t k = 0; k < job.demo.segment_count(); ++k) {
    result.models.push_back(fit_dmp(job.demo.segment(k), job.dmp));
    result.model_hashes.push_back(dmp_model_hash(result.models.back()));
  }
  result.rollouts.resize(job.n_demos);

  unsigned threads = job.threads == 0 ? std::thread::hardware_concurrency() : job.threads;
  threads = std::clamp<unsigned>(threads, 1, static_cast<unsigned>(job.n_demos));
  std::atomic<std::size_t> next{0};
  const auto worker = [&] {
    for (std::size_t i = next++; i < job.n_demos; i = next++) {
      result.rollouts[i] = run_rollout(job, result, i);
    }
  };
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (unsigned t = 0; t < threads; ++t) {
      pool.emplace_back(worker);
    }
  }
  return result;
}

std::string rollout_file_name(std::size_t index) {
  char buffer[32];
  std::snprintf(buffer, sizeof buffer, "rollout_%04zu.csv", index);
  return buffer;
}

std::string manifest_json(const SynthesisJob& job, const SynthesisResult& result) {
  nlohmann::json perturbation = {{"seed", job.perturbation.seed},
                                 {"default", distribution_json(job.perturbation.distribution)}};
  nlohmann::json overrides = nlohmann::json::object();
  for (const auto& [boundary, d] : job.perturbation.overrides) {
    overrides[std::to_string(boundary)] = distribution_json(d);
  }
  perturbation["overrides"] = overrides;
  nlohmann::json perturbable = nlohmann::json::array();
  for (std::size_t b = 0; b <= job.demo.segment_count(); ++b) {
    perturbable.push_back(job.perturbation.is_perturbable(b));
  }
  perturbation["perturbable"] = perturbable;

  const ObstacleParams& o = job.obstacle;
  nlohmann::json doc = {
      {"seed", job.perturbation.seed},
      {"n_demos", job.n_demos},
      {"dt", job.dt},
      {"horizon_factor", job.horizon_factor},
      {"dmp",
       {{"alpha_z", job.dmp.alpha_z},
        {"alpha_s", job.dmp.alpha_s},
        {"n_basis", job.dmp.n_basis},
        {"ridge_lambda", job.dmp.ridge_lambda}}},
      {"obstacle",
       {{"enabled", job.obstacle_enabled},
        {"rho_th", o.rho_th},
        {"lambda_max", o.lambda_max},
        {"gamma", o.gamma},
        {"epsilon", o.epsilon},
        {"lookahead", o.lookahead},
        {"return_gain", o.return_gain},
        {"return_cap", o.return_cap},
        {"gradient_step", o.gradient_step}}},
      {"collision_rho_th", job.evaluation_threshold()},
      {"perturbation", perturbation},
      {"model_hashes", result.model_hashes},
      {"failed", result.failed_count()}};

  nlohmann::json rollouts = nlohmann::json::array();
  for (const auto& r : result.rollouts) {
    nlohmann::json entry = {{"index", r.index},
                            {"status", r.status == RolloutStatus::kOk ? "ok" : "failed"}};
    nlohmann::json ps = nlohmann::json::array();
    for (const auto& p : r.perturbations) {
      ps.push_back({{"boundary", p.boundary},
                    {"dp", vec_json(p.dp)},
                    {"dq", quat_json(p.dq)},
                    {"angle", 2.0 * std::atan2(p.dq.vec().norm(), p.dq.w())}});
    }
    entry["perturbations"] = ps;
    nlohmann::json goals = nlohmann::json::array();
    for (const auto& g : r.segment_goals) {
      goals.push_back(pose_json(g));
    }
    entry["segment_goals"] = goals;
    if (r.status == RolloutStatus::kOk) {
      entry["file"] = rollout_file_name(r.index);
      entry["dtw_position"] = r.report.dtw_position;
      entry["dtw_orientation"] = r.report.dtw_orientation;
      entry["collided"] = r.report.collided;
      entry["max_density"] = r.report.max_density;
    } else {
      entry["error"] = r.error;
    }
    rollouts.push_back(entry);
  }
  doc["rollouts"] = rollouts;
  return doc.dump(1) + "\n";
}

void export_dataset(const SynthesisJob& job, const SynthesisResult& result,
                    const std::filesystem::path& directory) {
  if (result.rollouts.empty()) {
    throw ExportError("nothing to export");
  }
  std::error_code ec;
  std::filesystem::create_directories(directory, ec);
  if (ec) {
    throw ExportError("cannot create " + directory.string() + ": " + ec.message());
  }
  std::vector<EvalReport> reports;
  for (const auto& r : result.rollouts) {
    if (r.status == RolloutStatus::kOk) {
      write_trajectory_csv(r.trajectory, directory / rollout_file_name(r.index));
      reports.push_back(r.report);
    }
  }
  write_text_file(directory / "manifest.json", manifest_json(job, result));
  write_text_file(directory / "summary.csv", summary_csv(reports));
}

}  // namespace fte
