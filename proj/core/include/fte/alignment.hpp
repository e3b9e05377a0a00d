#pragma once

#include "fte/geometry.hpp"
#include "fte/scene.hpp"

#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace fte {

/// Rigid motion x -> R x + t.
struct RigidTransform {
  Mat3 rotation = Mat3::Identity();
  Vec3 translation = Vec3::Zero();

  static RigidTransform identity() { return {}; }

  Vec3 apply(const Vec3& x) const { return rotation * x + translation; }
  RigidTransform inverse() const;
  RigidTransform operator*(const RigidTransform& rhs) const;

  /// R^T R = I and det R = +1, both to `tolerance`.
  bool is_valid(double tolerance = 1e-9) const;
};

struct IcpParams {
  std::size_t max_iters = 100;
  double tol = 1e-8;           // stop when the RMS residual changes by less (meters)
  double max_corr_dist = 0.1;  // correspondences farther than this are ignored (meters)
  RigidTransform initial;      // coarse alignment supplied by the caller
};

struct IcpResult {
  RigidTransform transform;
  double residual = 0.0;  // RMS over inlier correspondences
  std::size_t inliers = 0;
  std::vector<double> residual_history;  // one entry per iteration
};

/// Point-to-point ICP: nearest-neighbour correspondences (capped at
/// max_corr_dist) alternating with the closed-form SVD Procrustes update.
/// Deterministic for given inputs.
///
/// Throws AlignmentError when either set has fewer than 3 points, when no
/// correspondences fall within max_corr_dist, or when the matched points are
/// collinear (cross-covariance rank below 2).
IcpResult icp_align(std::span<const Vec3> source, std::span<const Vec3> target,
                    const IcpParams& params = {});

/// Closed-form least-squares rigid transform mapping source[i] onto target[i].
RigidTransform fit_rigid_transform(std::span<const Vec3> source, std::span<const Vec3> target);

/// Moves every blob: mu -> R mu + t, Sigma -> R Sigma R^T. Opacities are kept and the index rebuilt.
GaussianScene apply_transform(const GaussianScene& scene, const RigidTransform& transform);

/// XYZ CSV (optional header line) or, for .json, the means of a native JSON scene.
std::vector<Vec3> read_point_set(const std::filesystem::path& path);

/// {"matrix": [[r00, r01, r02, t0], [..], [..], [0, 0, 0, 1]]}, row-major.
std::string transform_to_json(const RigidTransform& transform);
RigidTransform parse_transform_json(std::string_view text);

}  // namespace fte
