#include "scenarios.hpp"

#include <fte/error.hpp>
#include <fte/geometry.hpp>

#include <gtest/gtest.h>

#include <cmath>
#include <random>

namespace fte {
namespace {

bool equal_up_to_sign(const UnitQuaternion& a, const UnitQuaternion& b, double tol) {
  const Eigen::Vector4d va(a.w(), a.x(), a.y(), a.z());
  const Eigen::Vector4d vb(b.w(), b.x(), b.y(), b.z());
  return (va - vb).norm() < tol || (va + vb).norm() < tol;
}

double norm4(const UnitQuaternion& q) {
  return std::sqrt(q.w() * q.w() + q.x() * q.x() + q.y() * q.y() + q.z() * q.z());
}

TEST(Quaternion, ConstructorNormalizesAndCanonicalizes) {
  const UnitQuaternion q(-2.0, 0.0, 0.0, 0.0);
  EXPECT_EQ(q, UnitQuaternion::identity());
  const UnitQuaternion r(0.0, -1.0, 0.0, 0.0);
  EXPECT_EQ(r.x(), 1.0);
  const UnitQuaternion s(0.0, 0.0, 0.0, -3.0);
  EXPECT_EQ(s.z(), 1.0);
  EXPECT_NEAR(norm4(UnitQuaternion(1.0, 2.0, 3.0, 4.0)), 1.0, 1e-15);
}

TEST(Quaternion, RejectsDegenerateInput) {
  EXPECT_THROW(UnitQuaternion(0.0, 0.0, 0.0, 0.0), FormatError);
  EXPECT_THROW(UnitQuaternion(NAN, 0.0, 0.0, 1.0), FormatError);
}

TEST(Quaternion, RotateMatchesMatrix) {
  std::mt19937_64 rng(1);
  for (int i = 0; i < 100; ++i) {
    const UnitQuaternion q = testing::random_quaternion(rng);
    const Vec3 v = testing::random_in_ball(rng, 1.0);
    EXPECT_LT((q.rotate(v) - q.to_matrix() * v).norm(), 1e-12);
    EXPECT_TRUE(equal_up_to_sign(UnitQuaternion::from_matrix(q.to_matrix()), q, 1e-12));
  }
}

TEST(QuatLog, Identity) { EXPECT_EQ(quat_log(UnitQuaternion::identity()), Vec3::Zero()); }

TEST(QuatLog, QuarterTurnAboutZ) {
  const UnitQuaternion q(std::cos(kPi / 4), 0.0, 0.0, std::sin(kPi / 4));
  EXPECT_LT((quat_log(q) - Vec3(0.0, 0.0, kPi / 2)).norm(), 1e-15);
}

TEST(QuatLog, RoundTripRandom) {
  std::mt19937_64 rng(2);
  for (int i = 0; i < 1000; ++i) {
    const UnitQuaternion q = testing::random_quaternion(rng);
    const Vec3 r = quat_log(q);
    EXPECT_LE(r.norm(), kPi + 1e-15);
    EXPECT_TRUE(equal_up_to_sign(quat_exp(r), q, 1e-10));
  }
}

TEST(QuatExp, Zero) { EXPECT_EQ(quat_exp(Vec3::Zero()), UnitQuaternion::identity()); }

TEST(QuatExp, HalfTurnAboutX) {
  const UnitQuaternion q = quat_exp(Vec3(kPi, 0.0, 0.0));
  EXPECT_NEAR(q.w(), 0.0, 1e-15);
  EXPECT_NEAR(q.x(), 1.0, 1e-15);
  EXPECT_EQ(q.y(), 0.0);
  EXPECT_EQ(q.z(), 0.0);
}

TEST(QuatExp, SeriesBranchIsUnitAndMatchesExactBranch) {
  const UnitQuaternion tiny = quat_exp(Vec3(1e-10, -2e-11, 3e-11));
  EXPECT_EQ(norm4(tiny), 1.0);

  // Series branch at the threshold against the closed form evaluated directly.
  const Vec3 r = Vec3(0.3, -0.5, 0.8).normalized() * 0.99e-8;
  const UnitQuaternion series = quat_exp(r);
  const double angle = r.norm();
  const Vec3 axis = r / angle;
  const UnitQuaternion exact(std::cos(angle / 2), std::sin(angle / 2) * axis.x(),
                             std::sin(angle / 2) * axis.y(), std::sin(angle / 2) * axis.z());
  EXPECT_TRUE(equal_up_to_sign(series, exact, 1e-12));

  // And the exact branch at 1e-6 against a fourth-order expansion.
  const Vec3 m = Vec3(0.3, -0.5, 0.8).normalized() * 1e-6;
  const double a = m.norm();
  const double w = 1.0 - a * a / 8.0 + a * a * a * a / 384.0;
  const double s = 0.5 - a * a / 48.0;
  const UnitQuaternion expansion(w, s * m.x(), s * m.y(), s * m.z());
  EXPECT_TRUE(equal_up_to_sign(quat_exp(m), expansion, 1e-12));
}

TEST(Geodesic, SameAndOpposite) {
  std::mt19937_64 rng(3);
  const UnitQuaternion q = testing::random_quaternion(rng);
  EXPECT_NEAR(quat_geodesic_distance(q, q), 0.0, 1e-15);
  // -q is the same rotation; the canonical form makes them identical objects.
  const UnitQuaternion minus(-q.w(), -q.x(), -q.y(), -q.z());
  EXPECT_NEAR(quat_geodesic_distance(q, minus), 0.0, 1e-15);
}

TEST(Geodesic, QuarterTurn) {
  const UnitQuaternion q(std::cos(kPi / 4), 0.0, 0.0, std::sin(kPi / 4));
  EXPECT_NEAR(quat_geodesic_distance(UnitQuaternion::identity(), q), kPi / 2, 1e-15);
}

TEST(Geodesic, MatchesArccosFormula) {
  std::mt19937_64 rng(4);
  for (int i = 0; i < 1000; ++i) {
    const UnitQuaternion a = testing::random_quaternion(rng);
    const UnitQuaternion b = testing::random_quaternion(rng);
    const double reference = 2.0 * std::acos(std::min(1.0, std::abs(a.dot(b))));
    EXPECT_NEAR(quat_geodesic_distance(a, b), reference, 1e-7);
  }
}

TEST(GeodesicProperty, RangeSymmetryTriangle) {
  std::mt19937_64 rng(5);
  for (int i = 0; i < 2000; ++i) {
    const UnitQuaternion a = testing::random_quaternion(rng);
    const UnitQuaternion b = testing::random_quaternion(rng);
    const UnitQuaternion c = testing::random_quaternion(rng);
    const double ab = quat_geodesic_distance(a, b);
    EXPECT_GE(ab, 0.0);
    EXPECT_LE(ab, kPi);
    EXPECT_EQ(ab, quat_geodesic_distance(b, a));
    EXPECT_LE(ab, quat_geodesic_distance(a, c) + quat_geodesic_distance(c, b) + 1e-9);
  }
}

TEST(Unwrap, ConstantSequenceUnchanged) {
  const std::vector<Vec3> rs(5, Vec3(0.1, 0.2, 0.3));
  EXPECT_EQ(unwrap_rotation_vectors(rs), rs);
}

TEST(Unwrap, ContinuesPastPi) {
  const std::vector<Vec3> rs{quat_log(quat_exp(Vec3(0, 0, 3.1))), quat_log(quat_exp(Vec3(0, 0, 3.2)))};
  // The raw second log is reflected to about -3.08 about z.
  ASSERT_LT(rs[1].z(), 0.0);
  const auto out = unwrap_rotation_vectors(rs);
  EXPECT_NEAR(out[1].z(), 3.2, 1e-12);
  EXPECT_LT((out[1] - out[0]).norm(), 0.2);
}

TEST(Unwrap, SlowRotationStepsStaySmall) {
  std::mt19937_64 rng(6);
  for (int trial = 0; trial < 20; ++trial) {
    // Rotation about a fixed axis, so the true step in rotation-vector space is
    // the angular increment; the sequence wraps past pi several times.
    const Vec3 axis = testing::random_in_ball(rng, 1.0).normalized();
    const double start = std::uniform_real_distribution<double>(-kPi, kPi)(rng);
    const double increment = 0.05;
    std::vector<Vec3> rs;
    for (int i = 0; i < 300; ++i) {
      rs.push_back(quat_log(quat_exp(axis * (start + increment * i))));
    }
    const auto out = unwrap_rotation_vectors(rs);
    for (std::size_t i = 1; i < out.size(); ++i) {
      EXPECT_LT((out[i] - out[i - 1]).norm(), 2.0 * increment) << "trial " << trial << " step " << i;
    }
  }
}

TEST(Unwrap, SignFlipsDoNotMatter) {
  std::vector<Vec3> plain;
  std::vector<Vec3> flipped;
  for (int i = 0; i < 80; ++i) {
    const double angle = 0.06 * i;
    const Vec3 r(0.0, angle, 0.0);
    const UnitQuaternion q = quat_exp(r);
    plain.push_back(quat_log(q));
    // Construct from the negated components; canonicalization undoes the flip.
    const UnitQuaternion minus(-q.w(), -q.x(), -q.y(), -q.z());
    flipped.push_back(quat_log(i % 7 == 3 ? minus : q));
  }
  EXPECT_EQ(unwrap_rotation_vectors(plain), unwrap_rotation_vectors(flipped));
}

TEST(Geometry, IsFinite) {
  EXPECT_TRUE(is_finite(Vec3(1, 2, 3)));
  EXPECT_FALSE(is_finite(Vec3(1, INFINITY, 3)));
  EXPECT_FALSE(is_finite(Vec3(NAN, 0, 0)));
}

}  // namespace
}  // namespace fte
