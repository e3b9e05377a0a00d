#include "fte/scene.hpp"

#include "fte/error.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>

namespace fte {
namespace {

// A blob covering more grid cells than this lives on a list checked by every query.
constexpr long kMaxCellsPerBlob = 4096;

}  // namespace

GaussianBlob::GaussianBlob(const Vec3& mean, const Mat3& covariance, double opacity,
                           double cutoff_sigmas)
    : mean_(mean), covariance_(covariance), opacity_(opacity), cutoff_sigmas_(cutoff_sigmas) {
  if (!is_finite(mean)) {
    throw FormatError("blob mean is not finite");
  }
  if (!(opacity > 0.0 && opacity <= 1.0)) {
    throw FormatError("blob opacity outside (0, 1]");
  }
  if (!covariance.allFinite() || (covariance - covariance.transpose()).cwiseAbs().maxCoeff() > 1e-9) {
    throw FormatError("blob covariance is not symmetric");
  }
  const Mat3 symmetric = 0.5 * (covariance + covariance.transpose());
  const Eigen::SelfAdjointEigenSolver<Mat3> eig(symmetric);
  if (eig.info() != Eigen::Success || eig.eigenvalues().minCoeff() <= 1e-12) {
    throw FormatError("blob covariance is not positive definite");
  }
  covariance_ = symmetric;
  precision_ = eig.eigenvectors() * eig.eigenvalues().cwiseInverse().asDiagonal() *
               eig.eigenvectors().transpose();
  precision_ = 0.5 * (precision_ + precision_.transpose()).eval();
  radius_ = cutoff_sigmas_ * std::sqrt(eig.eigenvalues().maxCoeff());
}

double GaussianBlob::evaluate(const Vec3& x) const {
  const Vec3 d = x - mean_;
  return opacity_ * std::exp(-0.5 * d.dot(precision_ * d));
}

GaussianScene::GaussianScene(std::vector<GaussianBlob> blobs, double opacity_floor,
                             std::size_t rejected)
    : opacity_floor_(opacity_floor), rejected_(rejected) {
  blobs_.reserve(blobs.size());
  for (auto& blob : blobs) {
    if (blob.opacity() >= opacity_floor) {
      blobs_.push_back(std::move(blob));
    } else {
      ++dropped_;
    }
  }
  for (const auto& blob : blobs_) {
    max_radius_ = std::max(max_radius_, blob.radius());
  }
  build_index();
}

long GaussianScene::cell_coord(double v) const {
  return static_cast<long>(std::floor(v / cell_size_));
}

GaussianScene::CellKey GaussianScene::cell_key(long ix, long iy, long iz) const {
  // 21 bits per axis; aliasing cells only cost extra candidates, never correctness,
  // because every candidate is filtered by exact distance.
  constexpr CellKey mask = (CellKey{1} << 21) - 1;
  return (static_cast<CellKey>(ix) & mask) | ((static_cast<CellKey>(iy) & mask) << 21) |
         ((static_cast<CellKey>(iz) & mask) << 42);
}

void GaussianScene::build_index() {
  use_grid_ = blobs_.size() >= kGridMinBlobs;
  if (!use_grid_) {
    return;
  }
  std::vector<double> radii;
  radii.reserve(blobs_.size());
  for (const auto& blob : blobs_) {
    radii.push_back(blob.radius());
  }
  std::nth_element(radii.begin(), radii.begin() + static_cast<std::ptrdiff_t>(radii.size() / 2),
                   radii.end());
  cell_size_ = radii[radii.size() / 2];

  for (std::uint32_t i = 0; i < blobs_.size(); ++i) {
    const Vec3& mu = blobs_[i].mean();
    const double r = blobs_[i].radius();
    const long x0 = cell_coord(mu.x() - r), x1 = cell_coord(mu.x() + r);
    const long y0 = cell_coord(mu.y() - r), y1 = cell_coord(mu.y() + r);
    const long z0 = cell_coord(mu.z() - r), z1 = cell_coord(mu.z() + r);
    if ((x1 - x0 + 1) * (y1 - y0 + 1) * (z1 - z0 + 1) > kMaxCellsPerBlob) {
      oversized_.push_back(i);
      continue;
    }
    for (long ix = x0; ix <= x1; ++ix) {
      for (long iy = y0; iy <= y1; ++iy) {
        for (long iz = z0; iz <= z1; ++iz) {
          auto& cell = cells_[cell_key(ix, iy, iz)];
          if (cell.empty() || cell.back() != i) {
            cell.push_back(i);
          }
        }
      }
    }
  }
}

double GaussianScene::density(const Vec3& x) const {
  double rho = 0.0;
  const auto accumulate = [&](std::uint32_t i) {
    const GaussianBlob& blob = blobs_[i];
    const Vec3 d = x - blob.mean();
    if (d.squaredNorm() <= blob.radius() * blob.radius()) {
      rho += blob.opacity() * std::exp(-0.5 * d.dot(blob.precision() * d));
    }
  };
  if (!use_grid_) {
    for (std::uint32_t i = 0; i < blobs_.size(); ++i) {
      accumulate(i);
    }
    return rho;
  }
  const auto it = cells_.find(cell_key(cell_coord(x.x()), cell_coord(x.y()), cell_coord(x.z())));
  if (it != cells_.end()) {
    for (const std::uint32_t i : it->second) {
      accumulate(i);
    }
  }
  for (const std::uint32_t i : oversized_) {
    accumulate(i);
  }
  return rho;
}

std::vector<std::size_t> GaussianScene::query_neighbors(const Vec3& x, double radius) const {
  std::vector<std::size_t> out;
  const auto intersects = [&](std::size_t i) {
    const double reach = radius + blobs_[i].radius();
    return (blobs_[i].mean() - x).squaredNorm() <= reach * reach;
  };
  const auto linear_scan = [&] {
    for (std::size_t i = 0; i < blobs_.size(); ++i) {
      if (intersects(i)) {
        out.push_back(i);
      }
    }
    return out;
  };
  if (!use_grid_) {
    return linear_scan();
  }
  const long x0 = cell_coord(x.x() - radius), x1 = cell_coord(x.x() + radius);
  const long y0 = cell_coord(x.y() - radius), y1 = cell_coord(x.y() + radius);
  const long z0 = cell_coord(x.z() - radius), z1 = cell_coord(x.z() + radius);
  if ((x1 - x0 + 1) * (y1 - y0 + 1) * (z1 - z0 + 1) > static_cast<long>(blobs_.size())) {
    return linear_scan();
  }
  for (long ix = x0; ix <= x1; ++ix) {
    for (long iy = y0; iy <= y1; ++iy) {
      for (long iz = z0; iz <= z1; ++iz) {
        const auto it = cells_.find(cell_key(ix, iy, iz));
        if (it == cells_.end()) {
          continue;
        }
        for (const std::uint32_t i : it->second) {
          if (intersects(i)) {
            out.push_back(i);
          }
        }
      }
    }
  }
  for (const std::uint32_t i : oversized_) {
    if (intersects(i)) {
      out.push_back(i);
    }
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

double density(const GaussianScene& scene, const Vec3& x) { return scene.density(x); }

Vec3 density_gradient(const GaussianScene& scene, const Vec3& x, double h) {
  Vec3 grad;
  for (int axis = 0; axis < 3; ++axis) {
    Vec3 forward = x;
    Vec3 backward = x;
    forward[axis] += h;
    backward[axis] -= h;
    grad[axis] = (scene.density(forward) - scene.density(backward)) / (2.0 * h);
  }
  return grad;
}

std::vector<std::size_t> query_neighbors(const GaussianScene& scene, const Vec3& x,
                                         double radius) {
  return scene.query_neighbors(x, radius);
}

}  // namespace fte
