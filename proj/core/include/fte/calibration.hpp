#pragma once

#include "fte/scene.hpp"
#include "fte/trajectory.hpp"

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

namespace fte {

struct CalibrationOptions {
  std::size_t probes = 1000;  // uniform probes in the padded bounding box
  std::uint64_t seed = 0;
  double percentile = 0.99;
  double safety_factor = 2.0;
  double floor = 1e-3;  // suggestion never drops below this
  std::size_t bins = 20;
  double padding = 0.1;  // meters added around the bounding box
};

struct HistogramBin {
  double lower = 0.0;
  double upper = 0.0;
  std::size_t path_count = 0;
  std::size_t probe_count = 0;
};

struct CalibrationReport {
  std::vector<double> path_density;
  std::vector<double> probe_density;
  double path_max = 0.0;
  double path_percentile = 0.0;
  double suggested_threshold = 0.0;
  std::vector<HistogramBin> histogram;
};

/// Density along the expert path and at random probes. Suggests
/// max(safety_factor * percentile(path density), floor).
CalibrationReport calibrate_density_threshold(const GaussianScene& scene, const Trajectory& expert,
                                              const CalibrationOptions& options = {});

/// bin_lower,bin_upper,path_count,probe_count
std::string histogram_to_csv(const CalibrationReport& report);

/// Linear interpolation between order statistics; q in [0, 1].
double percentile(std::vector<double> values, double q);

}  // namespace fte
