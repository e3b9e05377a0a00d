#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

#include <span>
#include <vector>

namespace fte {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

inline constexpr double kPi = 3.14159265358979323846;

/// Angles (or rotation-vector norms) below this use series expansions in log/exp.
inline constexpr double kSmallAngle = 1e-8;

bool is_finite(const Vec3& v);

/// Unit quaternion (w, x, y, z), Hamilton convention.
///
/// Every constructor normalizes (input within 4 ulp of unit norm is kept as
/// given) and canonicalizes the sign so that w >= 0
/// (ties broken on x, then y, then z). Two quaternions describing the same
/// rotation therefore compare equal and serialize identically.
class UnitQuaternion {
 public:
  UnitQuaternion() = default;

  /// Throws FormatError when the input is non-finite or has zero norm.
  UnitQuaternion(double w, double x, double y, double z);

  static UnitQuaternion identity() { return {}; }
  static UnitQuaternion from_matrix(const Mat3& rotation);

  double w() const noexcept { return w_; }
  double x() const noexcept { return x_; }
  double y() const noexcept { return y_; }
  double z() const noexcept { return z_; }
  Vec3 vec() const { return {x_, y_, z_}; }

  UnitQuaternion inverse() const { return {w_, -x_, -y_, -z_}; }
  UnitQuaternion operator*(const UnitQuaternion& rhs) const;

  double dot(const UnitQuaternion& other) const noexcept {
    return w_ * other.w_ + x_ * other.x_ + y_ * other.y_ + z_ * other.z_;
  }

  Vec3 rotate(const Vec3& v) const;
  Mat3 to_matrix() const;

  friend bool operator==(const UnitQuaternion&, const UnitQuaternion&) = default;

 private:
  double w_ = 1.0;
  double x_ = 0.0;
  double y_ = 0.0;
  double z_ = 0.0;
};

struct Pose {
  Vec3 position = Vec3::Zero();
  UnitQuaternion orientation;
};

/// Rotation vector of q; the norm lies in [0, pi] because of the w >= 0 canonical form.
Vec3 quat_log(const UnitQuaternion& q);

/// Quaternion rotating by |r| about r/|r|.
UnitQuaternion quat_exp(const Vec3& r);

/// Rotation angle between two orientations, in [0, pi]; q and -q are at distance 0.
double quat_geodesic_distance(const UnitQuaternion& q1, const UnitQuaternion& q2);

/// Removes 2*pi branch jumps from a sequence of rotation vectors produced by
/// consecutive quat_log calls. Each element after the first is replaced by the
/// candidate r + 2*pi*k*r_hat (any integer k) closest to its predecessor.
std::vector<Vec3> unwrap_rotation_vectors(std::span<const Vec3> rotation_vectors);

}  // namespace fte
