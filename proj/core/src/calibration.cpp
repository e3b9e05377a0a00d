#include "fte/calibration.hpp"

#include "fte/text_io.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace fte {

double percentile(std::vector<double> values, double q) {
  if (values.empty()) {
    return 0.0;
  }
  std::sort(values.begin(), values.end());
  const double pos = std::clamp(q, 0.0, 1.0) * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, values.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return values[lo] + frac * (values[hi] - values[lo]);
}

CalibrationReport calibrate_density_threshold(const GaussianScene& scene, const Trajectory& expert,
                                              const CalibrationOptions& options) {
  CalibrationReport report;
  Vec3 lo = Vec3::Constant(std::numeric_limits<double>::infinity());
  Vec3 hi = -lo;
  for (const Sample& s : expert.samples()) {
    const double rho = scene.density(s.pose.position);
    report.path_density.push_back(rho);
    report.path_max = std::max(report.path_max, rho);
    lo = lo.cwiseMin(s.pose.position);
    hi = hi.cwiseMax(s.pose.position);
  }
  for (const auto& blob : scene.blobs()) {
    lo = lo.cwiseMin(blob.mean());
    hi = hi.cwiseMax(blob.mean());
  }
  if (!is_finite(lo) || !is_finite(hi)) {
    lo = hi = Vec3::Zero();
  }
  lo.array() -= options.padding;
  hi.array() += options.padding;

  std::mt19937_64 engine(options.seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (std::size_t i = 0; i < options.probes; ++i) {
    Vec3 p;
    for (int d = 0; d < 3; ++d) {
      p[d] = lo[d] + unit(engine) * (hi[d] - lo[d]);
    }
    report.probe_density.push_back(scene.density(p));
  }

  report.path_percentile = percentile(report.path_density, options.percentile);
  report.suggested_threshold =
      std::max(options.safety_factor * report.path_percentile, options.floor);

  double top = report.suggested_threshold;
  for (const double v : report.probe_density) {
    top = std::max(top, v);
  }
  top = std::max(top, report.path_max);
  const std::size_t bins = std::max<std::size_t>(options.bins, 1);
  const double width = top / static_cast<double>(bins);
  report.histogram.resize(bins);
  for (std::size_t b = 0; b < bins; ++b) {
    report.histogram[b].lower = width * static_cast<double>(b);
    report.histogram[b].upper = width * static_cast<double>(b + 1);
  }
  const auto bin_of = [&](double v) {
    if (width <= 0.0) {
      return std::size_t{0};
    }
    return std::min(static_cast<std::size_t>(v / width), bins - 1);
  };
  for (const double v : report.path_density) {
    ++report.histogram[bin_of(v)].path_count;
  }
  for (const double v : report.probe_density) {
    ++report.histogram[bin_of(v)].probe_count;
  }
  return report;
}

std::string histogram_to_csv(const CalibrationReport& report) {
  std::string out = "bin_lower,bin_upper,path_count,probe_count\n";
  for (const auto& bin : report.histogram) {
    out += format_number(bin.lower) + "," + format_number(bin.upper) + "," +
           std::to_string(bin.path_count) + "," + std::to_string(bin.probe_count) + "\n";
  }
  return out;
}

}  // namespace fte
