#include "fte/geometry.hpp"

#include "fte/error.hpp"

#include <cmath>
#include <limits>

namespace fte {

bool is_finite(const Vec3& v) {
  return std::isfinite(v.x()) && std::isfinite(v.y()) && std::isfinite(v.z());
}

UnitQuaternion::UnitQuaternion(double w, double x, double y, double z) {
  const double norm = std::sqrt(w * w + x * x + y * y + z * z);
  if (!std::isfinite(norm) || norm == 0.0) {
    throw FormatError("quaternion must be finite and non-zero");
  }
  // Input already unit to rounding is kept as is, so that text round trips
  // reproduce the stored components bit for bit.
  if (std::abs(norm - 1.0) > 4.0 * std::numeric_limits<double>::epsilon()) {
    w /= norm;
    x /= norm;
    y /= norm;
    z /= norm;
  }
  bool flip = false;
  if (w != 0.0) {
    flip = w < 0.0;
  } else if (x != 0.0) {
    flip = x < 0.0;
  } else if (y != 0.0) {
    flip = y < 0.0;
  } else {
    flip = z < 0.0;
  }
  const double sign = flip ? -1.0 : 1.0;
  // Adding 0.0 turns -0.0 into +0.0 so that equal rotations serialize identically.
  w_ = sign * w + 0.0;
  x_ = sign * x + 0.0;
  y_ = sign * y + 0.0;
  z_ = sign * z + 0.0;
}

UnitQuaternion UnitQuaternion::from_matrix(const Mat3& rotation) {
  const Eigen::Quaterniond q(rotation);
  return {q.w(), q.x(), q.y(), q.z()};
}

UnitQuaternion UnitQuaternion::operator*(const UnitQuaternion& rhs) const {
  return {w_ * rhs.w_ - x_ * rhs.x_ - y_ * rhs.y_ - z_ * rhs.z_,
          w_ * rhs.x_ + x_ * rhs.w_ + y_ * rhs.z_ - z_ * rhs.y_,
          w_ * rhs.y_ - x_ * rhs.z_ + y_ * rhs.w_ + z_ * rhs.x_,
          w_ * rhs.z_ + x_ * rhs.y_ - y_ * rhs.x_ + z_ * rhs.w_};
}

Vec3 UnitQuaternion::rotate(const Vec3& v) const {
  const Vec3 u = vec();
  const Vec3 t = 2.0 * u.cross(v);
  return v + w_ * t + u.cross(t);
}

Mat3 UnitQuaternion::to_matrix() const {
  return Eigen::Quaterniond(w_, x_, y_, z_).toRotationMatrix();
}

Vec3 quat_log(const UnitQuaternion& q) {
  const Vec3 v = q.vec();
  const double n = v.norm();
  if (n < kSmallAngle) {
    // atan(n/w) ~ n/w - (n/w)^3/3
    const double ratio = n / q.w();
    return (2.0 / q.w()) * (1.0 - ratio * ratio / 3.0) * v;
  }
  const double angle = 2.0 * std::atan2(n, q.w());
  return (angle / n) * v;
}

UnitQuaternion quat_exp(const Vec3& r) {
  const double angle = r.norm();
  if (angle < kSmallAngle) {
    const double a2 = angle * angle;
    const double c = 1.0 - a2 / 8.0;
    const double s = 0.5 - a2 / 48.0;
    return {c, s * r.x(), s * r.y(), s * r.z()};
  }
  const double s = std::sin(0.5 * angle) / angle;
  return {std::cos(0.5 * angle), s * r.x(), s * r.y(), s * r.z()};
}

double quat_geodesic_distance(const UnitQuaternion& q1, const UnitQuaternion& q2) {
  // Equal to 2*acos(|q1.q2|), written with atan2 to stay accurate near zero.
  // conj(q1) * q2 expanded so that identical inputs give an exactly zero vector part.
  const Vec3 v1 = q1.vec();
  const Vec3 v2 = q2.vec();
  const Vec3 rel_vec = q1.w() * v2 - q2.w() * v1 - v1.cross(v2);
  const double rel_w = q1.w() * q2.w() + v1.dot(v2);
  return 2.0 * std::atan2(rel_vec.norm(), std::abs(rel_w));
}

std::vector<Vec3> unwrap_rotation_vectors(std::span<const Vec3> rotation_vectors) {
  std::vector<Vec3> out(rotation_vectors.begin(), rotation_vectors.end());
  for (std::size_t i = 1; i < out.size(); ++i) {
    const Vec3& prev = out[i - 1];
    const Vec3 raw = rotation_vectors[i];
    Vec3 axis;
    if (raw.norm() > kSmallAngle) {
      axis = raw.normalized();
    } else if (prev.norm() > kSmallAngle) {
      axis = prev.normalized();
    } else {
      continue;
    }
    // Nearest whole turn along the axis, then its neighbours.
    const double turns = std::round((prev - raw).dot(axis) / (2.0 * kPi));
    Vec3 best = raw;
    double best_dist = (raw - prev).norm();
    for (const double k : {turns - 1.0, turns, turns + 1.0}) {
      const Vec3 candidate = raw + (2.0 * kPi * k) * axis;
      const double dist = (candidate - prev).norm();
      if (dist < best_dist) {
        best = candidate;
        best_dist = dist;
      }
    }
    out[i] = best;
  }
  return out;
}

}  // namespace fte
