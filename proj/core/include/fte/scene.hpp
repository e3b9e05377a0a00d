#pragma once

#include "fte/geometry.hpp"

#include <cstddef>
#include <cstdint>
#include <unordered_map>
#include <vector>

namespace fte {

/// Bounding radius of a blob, in standard deviations along its widest axis.
/// Contributions outside the radius are dropped; each dropped term is below
/// alpha * exp(-cutoff^2 / 2).
inline constexpr double kDefaultCutoffSigmas = 7.0;
inline constexpr double kDefaultOpacityFloor = 0.05;
inline constexpr double kDefaultGradientStep = 1e-3;

/// One anisotropic Gaussian of a splat scene (geometry only).
class GaussianBlob {
 public:
  /// Throws FormatError if the covariance is not symmetric positive definite
  /// (symmetry to 1e-9, eigenvalues > 1e-12), the mean is not finite, or the
  /// opacity is outside (0, 1].
  GaussianBlob(const Vec3& mean, const Mat3& covariance, double opacity,
               double cutoff_sigmas = kDefaultCutoffSigmas);

  const Vec3& mean() const noexcept { return mean_; }
  const Mat3& covariance() const noexcept { return covariance_; }
  const Mat3& precision() const noexcept { return precision_; }
  double opacity() const noexcept { return opacity_; }
  double radius() const noexcept { return radius_; }
  double cutoff_sigmas() const noexcept { return cutoff_sigmas_; }

  /// Untruncated contribution alpha * exp(-0.5 * d^T Sigma^-1 d).
  double evaluate(const Vec3& x) const;

 private:
  Vec3 mean_;
  Mat3 covariance_;
  Mat3 precision_;
  double opacity_;
  double radius_;
  double cutoff_sigmas_;
};

/// Immutable set of Gaussians with a uniform-grid index over their bounding spheres.
/// Concurrent const access is safe.
class GaussianScene {
 public:
  GaussianScene() = default;

  /// Blobs with opacity below `opacity_floor` are dropped. `rejected` records how
  /// many blobs the loader could not construct (reported, not stored).
  explicit GaussianScene(std::vector<GaussianBlob> blobs,
                         double opacity_floor = kDefaultOpacityFloor, std::size_t rejected = 0);

  const std::vector<GaussianBlob>& blobs() const noexcept { return blobs_; }
  std::size_t size() const noexcept { return blobs_.size(); }
  bool empty() const noexcept { return blobs_.empty(); }
  double opacity_floor() const noexcept { return opacity_floor_; }
  std::size_t rejected_count() const noexcept { return rejected_; }
  std::size_t dropped_below_floor() const noexcept { return dropped_; }
  double max_radius() const noexcept { return max_radius_; }

  /// Density with each blob truncated at its bounding radius; always >= 0.
  double density(const Vec3& x) const;

  /// Indices (ascending) of blobs whose bounding sphere intersects the ball (x, radius).
  std::vector<std::size_t> query_neighbors(const Vec3& x, double radius) const;

 private:
  using CellKey = std::uint64_t;

  void build_index();
  CellKey cell_key(long ix, long iy, long iz) const;
  long cell_coord(double v) const;

  std::vector<GaussianBlob> blobs_;
  double opacity_floor_ = kDefaultOpacityFloor;
  std::size_t rejected_ = 0;
  std::size_t dropped_ = 0;
  double max_radius_ = 0.0;

  bool use_grid_ = false;
  double cell_size_ = 1.0;
  std::unordered_map<CellKey, std::vector<std::uint32_t>> cells_;
  std::vector<std::uint32_t> oversized_;
};

/// Scenes smaller than this are scanned linearly instead of through the grid.
inline constexpr std::size_t kGridMinBlobs = 256;

double density(const GaussianScene& scene, const Vec3& x);

/// Central-difference gradient with step h per axis (six density evaluations).
Vec3 density_gradient(const GaussianScene& scene, const Vec3& x,
                      double h = kDefaultGradientStep);

std::vector<std::size_t> query_neighbors(const GaussianScene& scene, const Vec3& x,
                                         double radius);

}  // namespace fte
