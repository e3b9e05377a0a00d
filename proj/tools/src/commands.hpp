#pragma once

#include "config.hpp"

#include <fte/alignment.hpp>
#include <fte/calibration.hpp>

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>

namespace fte::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitRuntime = 1;
inline constexpr int kExitUsage = 2;

struct AlignOptions {
  std::filesystem::path scene;
  std::filesystem::path proxy;
  std::filesystem::path init_transform;  // empty: identity
  std::filesystem::path out_transform;
  std::filesystem::path out_scene;  // empty: not written
  IcpParams icp;
  SceneLoadOptions scene_options;
};

struct FitOptions {
  std::filesystem::path config;  // optional; only the dmp section is used
  std::filesystem::path demo;    // overrides demo.path
  std::filesystem::path out;
};

struct SynthOptions {
  std::filesystem::path config;
  std::filesystem::path out_dir;  // overrides output.dir
  std::optional<std::size_t> n_demos;
  std::optional<std::uint64_t> seed;
  std::optional<unsigned> threads;
};

struct EvalOptionsCli {
  std::filesystem::path config;  // optional: scene.*, obstacle.rho_th, metrics.*
  std::filesystem::path dataset;
  std::filesystem::path expert;
  std::filesystem::path scene;
  std::filesystem::path transform;
  std::filesystem::path out_dir;  // default: <dataset>/eval
  bool scene_unaligned = false;
  std::optional<double> rho_th;
  bool writing_error = false;
};

struct CalibrateOptions {
  std::filesystem::path scene;
  std::filesystem::path expert;
  std::filesystem::path histogram_out;  // empty: stdout only
  CalibrationOptions calibration;
  SceneLoadOptions scene_options;
};

struct DensityOptions {
  std::filesystem::path scene;
  Vec3 point = Vec3::Zero();
  bool gradient = false;
  double h = kDefaultGradientStep;
  SceneLoadOptions scene_options;
};

// Each command writes its report to `out` and returns an exit code. Usage and
// config errors surface as UsageError, runtime failures as fte::Error.
int cmd_align(const AlignOptions& options, std::ostream& out);
int cmd_fit(const FitOptions& options, std::ostream& out);
int cmd_synth(const SynthOptions& options, std::ostream& out);
int cmd_eval(const EvalOptionsCli& options, std::ostream& out);
int cmd_calibrate_rho(const CalibrateOptions& options, std::ostream& out);
int cmd_density(const DensityOptions& options, std::ostream& out);

/// Runs a command and maps exceptions to exit codes (2 for usage and config
/// errors, 1 otherwise), printing the message to `err`.
int run_guarded(const std::function<int()>& command, std::ostream& err);

/// Applies FTE_LOG_LEVEL (trace, debug, info, warn, error, off) to the logger.
void configure_logging();

}  // namespace fte::cli
