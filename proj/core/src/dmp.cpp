#include "fte/dmp.hpp"

#include "fte/error.hpp"

#include <Eigen/Cholesky>
#include <Eigen/LU>
#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <stdexcept>

namespace fte {
namespace {

struct ChannelFit {
  Eigen::MatrixXd weights;
  ChannelScaling scaling;
};

ChannelScaling scaling_from_demo(const std::vector<Vec3>& values) {
  ChannelScaling scaling;
  const Vec3 offset = values.back() - values.front();
  for (int d = 0; d < 3; ++d) {
    if (std::abs(offset[d]) >= kDegenerateAmplitude) {
      continue;
    }
    double lo = values.front()[d];
    double hi = lo;
    for (const Vec3& v : values) {
      lo = std::min(lo, v[d]);
      hi = std::max(hi, v[d]);
    }
    const double scale = std::max(std::abs(offset[d]), hi - lo);
    scaling.degenerate[static_cast<std::size_t>(d)] = true;
    scaling.fixed_scale[d] = scale < kDegenerateAmplitude ? 1.0 : scale;
  }
  return scaling;
}

/// Solves the ridge problem for the three dimensions of one channel.
ChannelFit fit_channel(const std::vector<double>& t, const std::vector<Vec3>& values,
                       const std::vector<double>& phases, const ForcingTerm& basis,
                       const DmpParams& params, double tau) {
  const std::size_t n = t.size();
  const std::size_t m = basis.size();
  const double beta_z = params.alpha_z / 4.0;
  ChannelFit fit;
  fit.scaling = scaling_from_demo(values);
  fit.weights = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(m), 3);

  Eigen::MatrixXd normalized(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(m));
  for (std::size_t i = 0; i < n; ++i) {
    normalized.row(static_cast<Eigen::Index>(i)) = basis.normalized_basis(phases[i]).transpose() * phases[i];
  }

  const Vec3 goal = values.back();
  const Vec3 scale = fit.scaling.scale_for(goal - values.front());
  std::vector<double> y(n);
  for (int d = 0; d < 3; ++d) {
    for (std::size_t i = 0; i < n; ++i) {
      y[i] = values[i][d];
    }
    const auto yd = finite_difference_first(t, y);
    const auto ydd = finite_difference_second(t, y);
    Eigen::VectorXd target(static_cast<Eigen::Index>(n));
    for (std::size_t i = 0; i < n; ++i) {
      target[static_cast<Eigen::Index>(i)] =
          tau * tau * ydd[i] - params.alpha_z * (beta_z * (goal[d] - y[i]) - tau * yd[i]);
    }
    const Eigen::MatrixXd design = normalized * scale[d];
    Eigen::MatrixXd gram = design.transpose() * design;
    gram.diagonal().array() += params.ridge_lambda;
    const Eigen::VectorXd rhs = design.transpose() * target;
    if (params.ridge_lambda <= 0.0) {
      const Eigen::FullPivLU<Eigen::MatrixXd> lu(gram);
      if (lu.rank() < gram.rows()) {
        throw FitError("normal equations are rank deficient; use ridge_lambda > 0");
      }
      fit.weights.col(d) = lu.solve(rhs);
    } else {
      fit.weights.col(d) = gram.ldlt().solve(rhs);
    }
    if (!fit.weights.col(d).allFinite()) {
      throw FitError("forcing weights are not finite");
    }
  }
  return fit;
}

Vec3 closest_branch(const Vec3& reference, const Vec3& raw) {
  const std::array<Vec3, 2> sequence = {reference, raw};
  return unwrap_rotation_vectors(sequence)[1];
}

nlohmann::json vec_json(const Vec3& v) { return {v.x(), v.y(), v.z()}; }

Vec3 vec_from(const nlohmann::json& j) {
  return {j.at(0).get<double>(), j.at(1).get<double>(), j.at(2).get<double>()};
}

nlohmann::json pose_json(const Pose& p) {
  const auto& q = p.orientation;
  return {{"position", vec_json(p.position)}, {"orientation", {q.w(), q.x(), q.y(), q.z()}}};
}

Pose pose_from(const nlohmann::json& j) {
  const auto& q = j.at("orientation");
  return {vec_from(j.at("position")),
          UnitQuaternion(q.at(0).get<double>(), q.at(1).get<double>(), q.at(2).get<double>(),
                         q.at(3).get<double>())};
}

nlohmann::json forcing_json(const ForcingTerm& f, const ChannelScaling& s) {
  nlohmann::json weights = nlohmann::json::array();
  for (int d = 0; d < 3; ++d) {
    std::vector<double> column(f.weights.col(d).data(), f.weights.col(d).data() + f.weights.rows());
    weights.push_back(column);
  }
  return {{"centers", f.centers},
          {"widths", f.widths},
          {"weights", weights},
          {"degenerate", s.degenerate},
          {"fixed_scale", vec_json(s.fixed_scale)}};
}

void forcing_from(const nlohmann::json& j, ForcingTerm& f, ChannelScaling& s) {
  f.centers = j.at("centers").get<std::vector<double>>();
  f.widths = j.at("widths").get<std::vector<double>>();
  const auto& weights = j.at("weights");
  if (weights.size() != 3 || f.centers.size() != f.widths.size()) {
    throw FormatError("DMP model forcing term has inconsistent sizes");
  }
  f.weights.resize(static_cast<Eigen::Index>(f.centers.size()), 3);
  for (int d = 0; d < 3; ++d) {
    const auto column = weights.at(static_cast<std::size_t>(d)).get<std::vector<double>>();
    if (column.size() != f.centers.size()) {
      throw FormatError("DMP model weight column has wrong length");
    }
    for (std::size_t i = 0; i < column.size(); ++i) {
      f.weights(static_cast<Eigen::Index>(i), d) = column[i];
    }
  }
  s.degenerate = j.at("degenerate").get<std::array<bool, 3>>();
  s.fixed_scale = vec_from(j.at("fixed_scale"));
}

}  // namespace

double CanonicalSystem::phase(double t) const { return std::exp(-alpha_s * t / tau); }

double CanonicalSystem::step_factor(double dt) const { return std::exp(-alpha_s * dt / tau); }

double canonical_phase(const CanonicalSystem& cs, double t) { return cs.phase(t); }

ForcingTerm ForcingTerm::with_basis(std::size_t n_basis, double alpha_s) {
  if (n_basis == 0) {
    throw FitError("n_basis must be positive");
  }
  ForcingTerm f;
  f.centers.resize(n_basis);
  f.widths.resize(n_basis);
  for (std::size_t i = 0; i < n_basis; ++i) {
    const double u = n_basis == 1 ? 0.0 : static_cast<double>(i) / static_cast<double>(n_basis - 1);
    f.centers[i] = std::exp(-alpha_s * u);
  }
  for (std::size_t i = 0; i + 1 < n_basis; ++i) {
    const double gap = f.centers[i + 1] - f.centers[i];
    f.widths[i] = 1.0 / (2.0 * gap * gap);
  }
  f.widths[n_basis - 1] = n_basis == 1 ? 1.0 : f.widths[n_basis - 2];
  f.weights = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n_basis), 3);
  return f;
}

Eigen::VectorXd ForcingTerm::normalized_basis(double s) const {
  const auto m = static_cast<Eigen::Index>(centers.size());
  Eigen::VectorXd exponent(m);
  for (Eigen::Index i = 0; i < m; ++i) {
    const double d = s - centers[static_cast<std::size_t>(i)];
    exponent[i] = widths[static_cast<std::size_t>(i)] * d * d;
  }
  const double shift = exponent.minCoeff();
  Eigen::VectorXd psi = (-(exponent.array() - shift)).exp();
  return psi / psi.sum();
}

Vec3 ForcingTerm::evaluate(double s, const Vec3& scale) const {
  const Eigen::VectorXd psi = normalized_basis(s);
  const Vec3 mix = weights.transpose() * psi;
  return mix.cwiseProduct(scale) * s;
}

Vec3 ChannelScaling::scale_for(const Vec3& goal_offset) const {
  Vec3 out = goal_offset;
  for (int d = 0; d < 3; ++d) {
    if (degenerate[static_cast<std::size_t>(d)]) {
      out[d] = fixed_scale[d];
    }
  }
  return out;
}

std::vector<double> finite_difference_first(std::span<const double> t, std::span<const double> y) {
  const std::size_t n = t.size();
  std::vector<double> out(n, 0.0);
  if (n < 3) {
    if (n == 2) {
      out[0] = out[1] = (y[1] - y[0]) / (t[1] - t[0]);
    }
    return out;
  }
  for (std::size_t i = 1; i + 1 < n; ++i) {
    const double h1 = t[i] - t[i - 1];
    const double h2 = t[i + 1] - t[i];
    out[i] = -h2 / (h1 * (h1 + h2)) * y[i - 1] + (h2 - h1) / (h1 * h2) * y[i] +
             h1 / (h2 * (h1 + h2)) * y[i + 1];
  }
  {
    const double h1 = t[1] - t[0];
    const double h2 = t[2] - t[1];
    out[0] = -(2.0 * h1 + h2) / (h1 * (h1 + h2)) * y[0] + (h1 + h2) / (h1 * h2) * y[1] -
             h1 / (h2 * (h1 + h2)) * y[2];
  }
  {
    const double h1 = t[n - 2] - t[n - 3];
    const double h2 = t[n - 1] - t[n - 2];
    out[n - 1] = h2 / (h1 * (h1 + h2)) * y[n - 3] - (h1 + h2) / (h1 * h2) * y[n - 2] +
                 (2.0 * h2 + h1) / (h2 * (h1 + h2)) * y[n - 1];
  }
  return out;
}

std::vector<double> finite_difference_second(std::span<const double> t, std::span<const double> y) {
  const std::size_t n = t.size();
  std::vector<double> out(n, 0.0);
  if (n < 3) {
    return out;
  }
  const auto at = [&](std::size_t i) {
    const double h1 = t[i] - t[i - 1];
    const double h2 = t[i + 1] - t[i];
    return 2.0 * (y[i - 1] / (h1 * (h1 + h2)) - y[i] / (h1 * h2) + y[i + 1] / (h2 * (h1 + h2)));
  };
  for (std::size_t i = 1; i + 1 < n; ++i) {
    out[i] = at(i);
  }
  out[0] = out[1];
  out[n - 1] = out[n - 2];
  return out;
}

DmpModel fit_dmp(const Trajectory& segment, const DmpParams& params) {
  const std::size_t n = segment.size();
  if (n < std::max<std::size_t>(10, params.n_basis)) {
    throw FitError("segment has " + std::to_string(n) + " samples; need at least " +
                   std::to_string(std::max<std::size_t>(10, params.n_basis)));
  }
  if (!(params.alpha_z > 0.0) || !(params.alpha_s > 0.0) || params.ridge_lambda < 0.0) {
    throw FitError("DMP gains must be positive and ridge_lambda non-negative");
  }

  DmpModel model;
  model.duration = segment.duration();
  model.canonical = {params.alpha_s, model.duration};
  model.alpha_z = params.alpha_z;
  model.beta_z = params.alpha_z / 4.0;
  model.start = segment.samples().front().pose;
  model.goal = segment.samples().back().pose;

  std::vector<double> t(n);
  std::vector<double> phases(n);
  std::vector<Vec3> positions(n);
  std::vector<Vec3> raw_rotations(n);
  const UnitQuaternion start_inverse = model.start.orientation.inverse();
  for (std::size_t i = 0; i < n; ++i) {
    const Sample& s = segment[i];
    t[i] = s.time - segment[0].time;
    phases[i] = model.canonical.phase(t[i]);
    positions[i] = s.pose.position;
    raw_rotations[i] = quat_log(start_inverse * s.pose.orientation);
  }
  const std::vector<Vec3> rotations = unwrap_rotation_vectors(raw_rotations);
  model.rotation_goal = rotations.back();

  const ForcingTerm basis = ForcingTerm::with_basis(params.n_basis, params.alpha_s);
  ChannelFit position = fit_channel(t, positions, phases, basis, params, model.duration);
  ChannelFit orientation = fit_channel(t, rotations, phases, basis, params, model.duration);

  model.position_forcing = basis;
  model.position_forcing.weights = std::move(position.weights);
  model.position_scaling = position.scaling;
  model.orientation_forcing = basis;
  model.orientation_forcing.weights = std::move(orientation.weights);
  model.orientation_scaling = orientation.scaling;
  return model;
}

std::size_t rollout_steps(const DmpModel& model, const RolloutOptions& options) {
  return static_cast<std::size_t>(std::ceil(options.horizon_factor * model.duration / options.dt - 1e-9));
}

RolloutResult rollout_states(const DmpModel& model, const Pose& new_start, const Pose& new_goal,
                             const RolloutOptions& options) {
  const double tau = model.canonical.tau;
  if (!(options.dt > 0.0) || options.dt > tau / 50.0 * (1.0 + 1e-12)) {
    throw std::invalid_argument("rollout dt must satisfy 0 < dt <= tau / 50");
  }
  if (!(options.horizon_factor > 0.0)) {
    throw std::invalid_argument("rollout horizon_factor must be positive");
  }
  const std::size_t steps = rollout_steps(model, options);
  const double dt = options.dt;
  const double decay = model.canonical.step_factor(dt);

  const Vec3 goal = new_goal.position;
  const Vec3 position_scale = model.position_scaling.scale_for(goal - new_start.position);
  const Vec3 rotation_goal = closest_branch(
      model.rotation_goal, quat_log(new_start.orientation.inverse() * new_goal.orientation));
  const Vec3 rotation_scale = model.orientation_scaling.scale_for(rotation_goal);

  double s = 1.0;
  Vec3 y = new_start.position;
  Vec3 v = Vec3::Zero();
  Vec3 r = Vec3::Zero();
  Vec3 w = Vec3::Zero();

  std::vector<Sample> samples;
  RolloutResult result;
  samples.reserve(steps + 1);
  result.velocities.reserve(steps + 1);
  result.phases.reserve(steps + 1);
  samples.push_back({0.0, new_start, 0.0});
  result.velocities.push_back(v);
  result.phases.push_back(s);

  for (std::size_t n = 0; n < steps; ++n) {
    s *= decay;

    Vec3 accel = model.alpha_z * (model.beta_z * (goal - y) - v) +
                 model.position_forcing.evaluate(s, position_scale);
    if (options.coupling) {
      const Vec3 extra = options.coupling(CouplingState{n, s, tau, dt, y, v});
      if (!extra.isZero(0.0)) {
        accel += extra;
      }
    }
    v += accel * (dt / tau);
    y += v * (dt / tau);

    const Vec3 rot_accel = model.alpha_z * (model.beta_z * (rotation_goal - r) - w) +
                           model.orientation_forcing.evaluate(s, rotation_scale);
    w += rot_accel * (dt / tau);
    r += w * (dt / tau);

    if (!is_finite(y) || !is_finite(v) || !is_finite(r) || !is_finite(w)) {
      throw RolloutError(n + 1, "non-finite state");
    }
    samples.push_back({static_cast<double>(n + 1) * dt,
                       {y, new_start.orientation * quat_exp(r)}, 0.0});
    result.velocities.push_back(v);
    result.phases.push_back(s);
  }
  result.trajectory = Trajectory::single_segment(std::move(samples));
  return result;
}

Trajectory rollout(const DmpModel& model, const Pose& new_start, const Pose& new_goal,
                   const RolloutOptions& options) {
  return rollout_states(model, new_start, new_goal, options).trajectory;
}

std::string dmp_model_to_json(const DmpModel& model) {
  const nlohmann::json doc = {
      {"alpha_s", model.canonical.alpha_s},
      {"tau", model.canonical.tau},
      {"alpha_z", model.alpha_z},
      {"beta_z", model.beta_z},
      {"duration", model.duration},
      {"start", pose_json(model.start)},
      {"goal", pose_json(model.goal)},
      {"rotation_goal", vec_json(model.rotation_goal)},
      {"position_forcing", forcing_json(model.position_forcing, model.position_scaling)},
      {"orientation_forcing", forcing_json(model.orientation_forcing, model.orientation_scaling)}};
  return doc.dump(1) + "\n";
}

DmpModel parse_dmp_model_json(std::string_view text) {
  DmpModel model;
  try {
    const auto doc = nlohmann::json::parse(text);
    model.canonical.alpha_s = doc.at("alpha_s").get<double>();
    model.canonical.tau = doc.at("tau").get<double>();
    model.alpha_z = doc.at("alpha_z").get<double>();
    model.beta_z = doc.at("beta_z").get<double>();
    model.duration = doc.at("duration").get<double>();
    model.start = pose_from(doc.at("start"));
    model.goal = pose_from(doc.at("goal"));
    model.rotation_goal = vec_from(doc.at("rotation_goal"));
    forcing_from(doc.at("position_forcing"), model.position_forcing, model.position_scaling);
    forcing_from(doc.at("orientation_forcing"), model.orientation_forcing,
                 model.orientation_scaling);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("DMP model JSON: ") + e.what());
  }
  return model;
}

std::string dmp_model_hash(const DmpModel& model) {
  std::uint64_t hash = 14695981039346656037ull;
  for (const char c : dmp_model_to_json(model)) {
    hash ^= static_cast<unsigned char>(c);
    hash *= 1099511628211ull;
  }
  char buffer[17];
  std::snprintf(buffer, sizeof(buffer), "%016llx", static_cast<unsigned long long>(hash));
  return buffer;
}

}  // namespace fte
