#include "commands.hpp"

#include <CLI11.hpp>

#include <functional>
#include <iostream>
#include <string>
#include <vector>

namespace {

using fte::cli::kExitOk;
using fte::cli::kExitUsage;

void add_scene_options(CLI::App* cmd, fte::SceneLoadOptions& options) {
  cmd->add_option("--opacity-floor", options.opacity_floor, "drop blobs below this opacity")
      ->capture_default_str();
  cmd->add_option("--cutoff-sigmas", options.cutoff_sigmas, "blob support radius in std devs")
      ->capture_default_str();
  cmd->add_flag_callback(
      "--raw-ply", [&options] { options.activation = fte::PlyActivation::kActivated; },
      "PLY stores activated scales and opacities");
}

}  // namespace

int main(int argc, char** argv) {
  fte::cli::configure_logging();

  CLI::App app{"Demonstration synthesis from one expert trajectory with splat-density obstacle avoidance"};
  app.require_subcommand(1);
  app.footer(fte::cli::config_help() + "\nEnvironment: FTE_LOG_LEVEL=trace|debug|info|warn|error|off");

  fte::cli::AlignOptions align;
  auto* align_cmd = app.add_subcommand("align", "ICP-align a splat scene to a robot proxy point cloud");
  align_cmd->add_option("--scene", align.scene, "scene (.ply or .json)")->required();
  align_cmd->add_option("--proxy", align.proxy, "proxy points (XYZ CSV or JSON scene)")->required();
  align_cmd->add_option("--init", align.init_transform, "coarse initial transform JSON");
  align_cmd->add_option("--out-transform", align.out_transform, "4x4 transform JSON")->required();
  align_cmd->add_option("--out-scene", align.out_scene, "aligned scene (.json or .ply)");
  align_cmd->add_option("--max-iters", align.icp.max_iters)->capture_default_str();
  align_cmd->add_option("--tol", align.icp.tol, "RMS change to stop (m)")->capture_default_str();
  align_cmd->add_option("--max-corr-dist", align.icp.max_corr_dist, "correspondence cap (m)")
      ->capture_default_str();
  add_scene_options(align_cmd, align.scene_options);

  fte::cli::FitOptions fit;
  auto* fit_cmd = app.add_subcommand("fit", "fit one DMP per demo segment and write the models");
  fit_cmd->add_option("--config", fit.config, "run config (dmp section)");
  fit_cmd->add_option("--demo", fit.demo, "demo trajectory; overrides demo.path");
  fit_cmd->add_option("--out", fit.out, "models JSON")->required();

  fte::cli::SynthOptions synth;
  std::size_t n_demos = 0;
  std::uint64_t seed = 0;
  unsigned threads = 0;
  auto* synth_cmd = app.add_subcommand("synth", "synthesize a dataset from a run config");
  synth_cmd->add_option("--config", synth.config, "run config JSON")->required();
  synth_cmd->add_option("--out-dir", synth.out_dir, "overrides output.dir");
  auto* n_opt = synth_cmd->add_option("--n-demos", n_demos, "overrides rollout.n_demos");
  auto* seed_opt = synth_cmd->add_option("--seed", seed, "overrides perturbation.seed");
  auto* threads_opt = synth_cmd->add_option("--threads", threads, "overrides rollout.threads");

  fte::cli::EvalOptionsCli eval;
  double rho_th = 0.0;
  auto* eval_cmd = app.add_subcommand("eval", "evaluate a directory of rollouts against the expert");
  eval_cmd->add_option("--dataset", eval.dataset, "directory of rollout CSVs")->required();
  eval_cmd->add_option("--expert", eval.expert, "expert trajectory")->required();
  eval_cmd->add_option("--config", eval.config, "run config (scene, obstacle.rho_th, metrics)");
  eval_cmd->add_option("--scene", eval.scene, "scene; overrides scene.path");
  eval_cmd->add_option("--transform", eval.transform, "scene-to-task transform JSON");
  eval_cmd->add_flag("--scene-unaligned", eval.scene_unaligned,
                     "scene is not in the task frame; requires --transform");
  auto* rho_opt = eval_cmd->add_option("--rho-th", rho_th, "overrides metrics.rho_th");
  eval_cmd->add_flag("--writing-error", eval.writing_error, "compute the writing error");
  eval_cmd->add_option("--out-dir", eval.out_dir, "report directory (default <dataset>/eval)");

  fte::cli::CalibrateOptions calibrate;
  auto* cal_cmd = app.add_subcommand("calibrate-rho", "density histogram along the expert path and a suggested rho_th");
  cal_cmd->add_option("--scene", calibrate.scene)->required();
  cal_cmd->add_option("--expert", calibrate.expert)->required();
  cal_cmd->add_option("--histogram", calibrate.histogram_out, "also write the histogram CSV here");
  cal_cmd->add_option("--probes", calibrate.calibration.probes)->capture_default_str();
  cal_cmd->add_option("--seed", calibrate.calibration.seed)->capture_default_str();
  cal_cmd->add_option("--percentile", calibrate.calibration.percentile)->capture_default_str();
  cal_cmd->add_option("--safety-factor", calibrate.calibration.safety_factor)->capture_default_str();
  cal_cmd->add_option("--floor", calibrate.calibration.floor, "smallest suggestion")->capture_default_str();
  cal_cmd->add_option("--bins", calibrate.calibration.bins)->capture_default_str();
  add_scene_options(cal_cmd, calibrate.scene_options);

  fte::cli::DensityOptions density;
  std::vector<double> point;
  auto* density_cmd = app.add_subcommand("density", "density (and gradient) at one point");
  density_cmd->add_option("--scene", density.scene)->required();
  density_cmd->add_option("--point", point, "x y z")->required()->expected(3)->delimiter(',');
  density_cmd->add_flag("--gradient", density.gradient);
  density_cmd->add_option("--step", density.h, "central-difference step (m)")->capture_default_str();
  add_scene_options(density_cmd, density.scene_options);

  for (auto* cmd : app.get_subcommands({})) {
    cmd->footer(fte::cli::config_help());
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  const auto run = [](const std::function<int()>& command) {
    return fte::cli::run_guarded(command, std::cerr);
  };
  if (*align_cmd) {
    return run([&] { return fte::cli::cmd_align(align, std::cout); });
  }
  if (*fit_cmd) {
    return run([&] { return fte::cli::cmd_fit(fit, std::cout); });
  }
  if (*synth_cmd) {
    if (*n_opt) synth.n_demos = n_demos;
    if (*seed_opt) synth.seed = seed;
    if (*threads_opt) synth.threads = threads;
    return run([&] { return fte::cli::cmd_synth(synth, std::cout); });
  }
  if (*eval_cmd) {
    if (*rho_opt) eval.rho_th = rho_th;
    return run([&] { return fte::cli::cmd_eval(eval, std::cout); });
  }
  if (*cal_cmd) {
    return run([&] { return fte::cli::cmd_calibrate_rho(calibrate, std::cout); });
  }
  if (*density_cmd) {
    density.point = fte::Vec3(point[0], point[1], point[2]);
    return run([&] { return fte::cli::cmd_density(density, std::cout); });
  }
  return kExitOk;
}
