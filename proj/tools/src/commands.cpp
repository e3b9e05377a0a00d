#include "commands.hpp"

#include <fte/alignment.hpp>
#include <fte/calibration.hpp>
#include <fte/error.hpp>
#include <fte/metrics.hpp>
#include <fte/scene_io.hpp>
#include <fte/synthesis.hpp>
#include <fte/text_io.hpp>

#include <nlohmann/json.hpp>
#include <spdlog/sinks/stdout_sinks.h>
#include <spdlog/spdlog.h>

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <iomanip>
#include <memory>
#include <ostream>

namespace fte::cli {
namespace {

void require_file(const std::filesystem::path& path, const char* what) {
  if (path.empty()) {
    throw UsageError(std::string(what) + " is required");
  }
  if (!std::filesystem::is_regular_file(path)) {
    throw UsageError(std::string(what) + " not found: " + path.string());
  }
}

GaussianScene load_scene_in_frame(const std::filesystem::path& scene_path,
                                  const std::filesystem::path& transform_path,
                                  const SceneLoadOptions& options) {
  require_file(scene_path, "scene");
  GaussianScene scene = load_scene(scene_path, options);
  spdlog::info("scene {}: {} blobs ({} rejected, {} below opacity floor)", scene_path.string(),
               scene.size(), scene.rejected_count(), scene.dropped_below_floor());
  if (!transform_path.empty()) {
    require_file(transform_path, "transform");
    scene = apply_transform(scene, parse_transform_json(read_text_file(transform_path)));
  }
  return scene;
}

Trajectory load_demo(const std::filesystem::path& path, const char* what) {
  require_file(path, what);
  return read_trajectory(path);
}

struct MeanStd {
  double mean = 0.0;
  double std = 0.0;
};

template <typename Get>
MeanStd mean_std(const std::vector<EvalReport>& reports, Get get) {
  MeanStd s;
  std::size_t n = 0;
  for (const auto& r : reports) {
    if (const std::optional<double> v = get(r)) {
      s.mean += *v;
      ++n;
    }
  }
  if (n == 0) {
    return s;
  }
  s.mean /= static_cast<double>(n);
  for (const auto& r : reports) {
    if (const std::optional<double> v = get(r)) {
      s.std += (*v - s.mean) * (*v - s.mean);
    }
  }
  s.std = std::sqrt(s.std / static_cast<double>(n));
  return s;
}

void print_table(const std::vector<EvalReport>& reports, std::ostream& out) {
  const auto row = [&](const char* name, MeanStd s) {
    out << std::left << std::setw(18) << name << std::right << std::setw(14) << s.mean << " +- "
        << std::setw(12) << s.std << "\n";
  };
  out << std::setprecision(6);
  out << std::left << std::setw(18) << "metric" << std::right << std::setw(14) << "mean" << "    "
      << std::setw(12) << "std" << "\n";
  row("dtw_position", mean_std(reports, [](const EvalReport& r) { return std::optional(r.dtw_position); }));
  row("dtw_orientation",
      mean_std(reports, [](const EvalReport& r) { return std::optional(r.dtw_orientation); }));
  row("max_density", mean_std(reports, [](const EvalReport& r) { return std::optional(r.max_density); }));
  row("collision", mean_std(reports, [](const EvalReport& r) {
        return std::optional(r.collided ? 1.0 : 0.0);
      }));
  if (std::any_of(reports.begin(), reports.end(), [](const auto& r) { return r.writing_error.has_value(); })) {
    row("writing_error", mean_std(reports, [](const EvalReport& r) { return r.writing_error; }));
  }
  out << "rollouts: " << reports.size() << "\n";
}

}  // namespace

int cmd_align(const AlignOptions& options, std::ostream& out) {
  require_file(options.scene, "scene");
  require_file(options.proxy, "proxy point set");
  if (options.out_transform.empty()) {
    throw UsageError("--out-transform is required");
  }
  IcpParams icp = options.icp;
  if (!options.init_transform.empty()) {
    require_file(options.init_transform, "initial transform");
    icp.initial = parse_transform_json(read_text_file(options.init_transform));
  }
  const GaussianScene scene = load_scene(options.scene, options.scene_options);
  std::vector<Vec3> source;
  source.reserve(scene.size());
  for (const auto& blob : scene.blobs()) {
    source.push_back(blob.mean());
  }
  const std::vector<Vec3> target = read_point_set(options.proxy);
  const IcpResult result = icp_align(source, target, icp);
  write_text_file(options.out_transform, transform_to_json(result.transform));
  if (!options.out_scene.empty()) {
    const GaussianScene aligned = apply_transform(scene, result.transform);
    const bool ply = options.out_scene.extension() == ".ply";
    write_text_file(options.out_scene, ply ? scene_to_ply(aligned) : scene_to_json(aligned));
  }
  out << "iterations: " << result.residual_history.size() << "\n"
      << "inliers: " << result.inliers << "\n"
      << "residual: " << format_number(result.residual) << "\n";
  return kExitOk;
}

int cmd_fit(const FitOptions& options, std::ostream& out) {
  RunConfig config = options.config.empty() ? default_run_config() : load_run_config(options.config);
  const std::filesystem::path demo_path = options.demo.empty() ? config.demo_path : options.demo;
  if (options.out.empty()) {
    throw UsageError("--out is required");
  }
  const Trajectory demo = load_demo(demo_path, "demo");
  nlohmann::json doc = {{"segments", nlohmann::json::array()}};
  for (std::size_t k = 0; k < demo.segment_count(); ++k) {
    const DmpModel model = fit_dmp(demo.segment(k), config.dmp);
    const std::string hash = dmp_model_hash(model);
    doc["segments"].push_back(
        {{"segment", k}, {"hash", hash}, {"model", nlohmann::json::parse(dmp_model_to_json(model))}});
    out << "segment " << k << ": " << demo.segment(k).size() << " samples, hash " << hash << "\n";
  }
  write_text_file(options.out, doc.dump(1) + "\n");
  return kExitOk;
}

int cmd_synth(const SynthOptions& options, std::ostream& out) {
  if (options.config.empty()) {
    throw UsageError("--config is required");
  }
  RunConfig config = load_run_config(options.config);
  if (!options.out_dir.empty()) {
    config.output_dir = options.out_dir;
  }
  if (options.n_demos) {
    config.n_demos = *options.n_demos;
  }
  if (options.seed) {
    config.perturbation.seed = *options.seed;
  }
  if (options.threads) {
    config.threads = *options.threads;
  }
  validate_run_config(config);

  SynthesisJob job;
  job.demo = load_demo(config.demo_path, "demo.path");
  if (!config.scene_path.empty()) {
    job.scene = std::make_shared<const GaussianScene>(
        load_scene_in_frame(config.scene_path, config.scene_transform, config.scene_options));
  } else if (config.obstacle_enabled) {
    throw UsageError("obstacle.enabled: requires scene.path");
  }
  job.perturbation = config.perturbation;
  job.obstacle = config.obstacle;
  job.obstacle_enabled = config.obstacle_enabled;
  job.dmp = config.dmp;
  job.n_demos = config.n_demos;
  job.dt = config.dt;
  job.horizon_factor = config.horizon_factor;
  job.threads = config.threads;
  job.collision_rho_th = config.collision_rho_th;
  try {
    job.validate();
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }

  const SynthesisResult result = synthesize(job);
  export_dataset(job, result, config.output_dir);
  for (const auto& r : result.rollouts) {
    out << rollout_file_name(r.index) << " ";
    if (r.status == RolloutStatus::kOk) {
      out << "ok dtw_position=" << format_number(r.report.dtw_position)
          << " collided=" << (r.report.collided ? 1 : 0) << "\n";
    } else {
      out << "failed: " << r.error << "\n";
    }
  }
  const std::size_t failed = result.failed_count();
  out << "synthesized " << result.rollouts.size() - failed << "/" << result.rollouts.size()
      << " rollouts into " << config.output_dir.string() << "\n";
  return failed == 0 ? kExitOk : kExitRuntime;
}

int cmd_eval(const EvalOptionsCli& options, std::ostream& out) {
  RunConfig config = options.config.empty() ? default_run_config() : load_run_config(options.config);
  const std::filesystem::path scene_path = options.scene.empty() ? config.scene_path : options.scene;
  const std::filesystem::path transform =
      options.transform.empty() ? config.scene_transform : options.transform;
  if (options.scene_unaligned && transform.empty()) {
    throw UsageError("--scene-unaligned requires --transform (scene and trajectories are in different frames)");
  }
  if (!std::filesystem::is_directory(options.dataset)) {
    throw UsageError("dataset directory not found: " + options.dataset.string());
  }
  const Trajectory expert = load_demo(options.expert, "expert");

  std::optional<GaussianScene> scene;
  if (!scene_path.empty()) {
    scene = load_scene_in_frame(scene_path, transform, config.scene_options);
  }
  EvalOptions eval;
  eval.scene = scene ? &*scene : nullptr;
  eval.rho_th = options.rho_th.value_or(config.collision_rho_th.value_or(config.obstacle.rho_th));
  if (!(eval.rho_th > 0.0)) {
    throw UsageError("--rho-th must be > 0");
  }
  if (options.writing_error || config.writing_error) {
    eval.writing = config.raster;
  }

  std::vector<std::filesystem::path> files;
  for (const auto& entry : std::filesystem::directory_iterator(options.dataset)) {
    const auto& p = entry.path();
    if (entry.is_regular_file() && p.extension() == ".csv" && p.filename() != "summary.csv") {
      files.push_back(p);
    }
  }
  std::sort(files.begin(), files.end());
  if (files.empty()) {
    throw UsageError("no trajectory CSVs in " + options.dataset.string());
  }

  std::vector<EvalReport> reports;
  for (const auto& file : files) {
    reports.push_back(evaluate_rollout(expert, read_trajectory(file), eval, file.filename().string()));
  }
  const std::filesystem::path out_dir = options.out_dir.empty() ? options.dataset / "eval" : options.out_dir;
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) {
    throw ExportError("cannot create " + out_dir.string() + ": " + ec.message());
  }
  write_text_file(out_dir / "summary.csv", summary_csv(reports));
  write_text_file(out_dir / "aggregate.json", aggregate_json(reports));
  print_table(reports, out);
  return kExitOk;
}

int cmd_calibrate_rho(const CalibrateOptions& options, std::ostream& out) {
  require_file(options.scene, "scene");
  const Trajectory expert = load_demo(options.expert, "expert");
  const GaussianScene scene = load_scene(options.scene, options.scene_options);
  const CalibrationReport report = calibrate_density_threshold(scene, expert, options.calibration);
  const std::string histogram = histogram_to_csv(report);
  if (!options.histogram_out.empty()) {
    write_text_file(options.histogram_out, histogram);
  }
  out << histogram << "\n"
      << "path_max," << format_number(report.path_max) << "\n"
      << "path_percentile," << format_number(report.path_percentile) << "\n"
      << "suggested_rho_th," << format_number(report.suggested_threshold) << "\n";
  return kExitOk;
}

int cmd_density(const DensityOptions& options, std::ostream& out) {
  require_file(options.scene, "scene");
  if (!(options.h > 0.0)) {
    throw UsageError("--step must be > 0");
  }
  const GaussianScene scene = load_scene(options.scene, options.scene_options);
  out << "density," << format_number(scene.density(options.point)) << "\n";
  if (options.gradient) {
    const Vec3 g = density_gradient(scene, options.point, options.h);
    out << "gradient," << format_number(g.x()) << "," << format_number(g.y()) << ","
        << format_number(g.z()) << "\n";
  }
  return kExitOk;
}

int run_guarded(const std::function<int()>& command, std::ostream& err) {
  try {
    return command();
  } catch (const UsageError& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::invalid_argument& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
}

void configure_logging() {
  if (!spdlog::get("fte")) {
    spdlog::set_default_logger(spdlog::stderr_logger_st("fte"));
  }
  spdlog::set_pattern("[%l] %v");
  spdlog::set_level(spdlog::level::warn);
  if (const char* level = std::getenv("FTE_LOG_LEVEL")) {
    spdlog::set_level(spdlog::level::from_str(level));
  }
}

}  // namespace fte::cli
