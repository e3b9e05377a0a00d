#pragma once

#include "fte/geometry.hpp"
#include "fte/scene.hpp"
#include "fte/trajectory.hpp"

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace fte {

struct DtwResult {
  double cost = 0.0;                                        // accumulated along the path
  std::vector<std::pair<std::size_t, std::size_t>> path;  // from (0,0) to (T-1,T*-1)

  /// Cost divided by the number of aligned pairs.
  double normalized() const { return path.empty() ? 0.0 : cost / static_cast<double>(path.size()); }
};

/// Dynamic time warping with steps (1,0), (0,1), (1,1), anchored at both ends,
/// no band constraint. `dist(a_i, b_j)` must be non-negative.
/// Backtracking prefers the diagonal, then (1,0), then (0,1).
template <typename T, typename Distance>
DtwResult dtw(std::span<const T> a, std::span<const T> b, Distance dist) {
  DtwResult result;
  const std::size_t n = a.size();
  const std::size_t m = b.size();
  if (n == 0 || m == 0) {
    return result;
  }
  constexpr double kInf = std::numeric_limits<double>::infinity();
  std::vector<double> acc(n * m, kInf);
  const auto at = [&](std::size_t i, std::size_t j) -> double& { return acc[i * m + j]; };
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < m; ++j) {
      const double d = dist(a[i], b[j]);
      if (i == 0 && j == 0) {
        at(i, j) = d;
        continue;
      }
      double best = kInf;
      if (i > 0 && j > 0) best = std::min(best, at(i - 1, j - 1));
      if (i > 0) best = std::min(best, at(i - 1, j));
      if (j > 0) best = std::min(best, at(i, j - 1));
      at(i, j) = best + d;
    }
  }
  result.cost = at(n - 1, m - 1);
  std::size_t i = n - 1;
  std::size_t j = m - 1;
  result.path.emplace_back(i, j);
  while (i > 0 || j > 0) {
    if (i > 0 && j > 0) {
      const double diag = at(i - 1, j - 1);
      const double up = at(i - 1, j);
      const double left = at(i, j - 1);
      if (diag <= up && diag <= left) {
        --i;
        --j;
      } else if (up <= left) {
        --i;
      } else {
        --j;
      }
    } else if (i > 0) {
      --i;
    } else {
      --j;
    }
    result.path.emplace_back(i, j);
  }
  std::reverse(result.path.begin(), result.path.end());
  return result;
}

DtwResult dtw_positions(std::span<const Vec3> a, std::span<const Vec3> b);
DtwResult dtw_orientations(std::span<const UnitQuaternion> a, std::span<const UnitQuaternion> b);
DtwResult dtw_scalar(std::span<const double> a, std::span<const double> b);

struct CollisionResult {
  bool collided = false;
  double max_density = 0.0;
  std::optional<std::size_t> first_violation;
};

/// Density at every sample position; collided iff any sample exceeds rho_th.
CollisionResult collision_check(const Trajectory& trajectory, const GaussianScene& scene,
                                double rho_th);

double collision_rate(std::span<const CollisionResult> results);

/// Plane the strokes are drawn on, as a point and a normal.
struct WritingPlane {
  Vec3 point = Vec3::Zero();
  Vec3 normal = Vec3::UnitZ();
};

struct RasterOptions {
  int resolution = 128;  // square canvas, pixels
  int stroke_px = 3;
  WritingPlane plane;
};

/// Binary image, row-major, row 0 at the top.
struct Raster {
  int size = 0;
  std::vector<std::uint8_t> pixels;

  std::size_t ink() const;
  bool at(int row, int col) const { return pixels[static_cast<std::size_t>(row * size + col)] != 0; }
};

/// Projects the points onto the plane, scales their own bounding box uniformly
/// onto the canvas (centered, margin of half a stroke), and draws the polyline
/// with Bresenham segments dilated to a stroke_px square. An empty point list
/// yields a blank canvas; a zero-area bounding box throws MetricError.
Raster rasterize_stroke(std::span<const Vec3> points, const RasterOptions& options);

/// |exec - expert|_1 / |expert|_1 over binary images of equal size.
double normalized_l1(const Raster& executed, const Raster& expert);

/// Normalized l1 pixel difference between the rasterized expert and executed
/// strokes. Unbounded above; an empty executed trajectory gives exactly 1.
double writing_error(const Trajectory& expert, const Trajectory& executed,
                     const RasterOptions& options = {});

/// Binary PGM (P5) for visual inspection.
std::string raster_to_pgm(const Raster& raster);

struct EvalReport {
  std::string name;
  double dtw_position = 0.0;     // meters, normalized by warping-path length
  double dtw_orientation = 0.0;  // radians, normalized by warping-path length
  bool collided = false;
  double max_density = 0.0;
  std::optional<double> writing_error;
};

struct EvalOptions {
  const GaussianScene* scene = nullptr;  // null: no collision evaluation
  double rho_th = 0.3;
  std::optional<RasterOptions> writing;  // set: compute the writing error
};

EvalReport evaluate_rollout(const Trajectory& expert, const Trajectory& rollout,
                            const EvalOptions& options, std::string name = {});

/// rollout,dtw_position,dtw_orientation,collided,max_density,writing_error
std::string summary_csv(std::span<const EvalReport> reports);

/// {"count": n, "<metric>": {"mean": .., "std": ..}, ..., "collision_rate": ..}
std::string aggregate_json(std::span<const EvalReport> reports);

}  // namespace fte
