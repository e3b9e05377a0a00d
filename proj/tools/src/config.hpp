#pragma once

#include <fte/dmp.hpp>
#include <fte/metrics.hpp>
#include <fte/obstacle.hpp>
#include <fte/scene_io.hpp>
#include <fte/synthesis.hpp>

#include <cstddef>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace fte::cli {

/// Bad invocation or configuration: exit code 2.
class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct KeySpec {
  std::string_view section;
  std::string_view key;
  std::string_view default_text;  // JSON literal
  std::string_view help;
};

/// Every accepted config key, in documentation order.
const std::vector<KeySpec>& config_keys();

/// Plain-text key table for --help.
std::string config_help();

struct RunConfig {
  std::filesystem::path demo_path;
  std::filesystem::path scene_path;       // empty: no scene
  std::filesystem::path scene_transform;  // empty: scene already in the task frame
  SceneLoadOptions scene_options;
  PerturbationSpec perturbation;
  ObstacleParams obstacle;
  bool obstacle_enabled = true;
  DmpParams dmp;
  std::size_t n_demos = 1;
  double dt = 0.02;
  double horizon_factor = 1.25;
  unsigned threads = 0;
  std::filesystem::path output_dir = "fte_out";
  std::optional<double> collision_rho_th;  // unset: obstacle.rho_th
  bool writing_error = false;
  RasterOptions raster;
};

/// Parses and validates a config document. Unknown sections or keys, wrong
/// types and out-of-range values throw UsageError naming "section.key".
/// Relative paths are resolved against `base_dir`.
RunConfig parse_run_config(std::string_view text, const std::filesystem::path& base_dir = {});

/// Reads the file (UsageError with the path if it is missing) and parses it.
RunConfig load_run_config(const std::filesystem::path& path);

/// Config with every default and no paths.
RunConfig default_run_config();

/// Range checks shared by the config parser and command-line overrides.
void validate_run_config(const RunConfig& config);

}  // namespace fte::cli
