#include "scenarios.hpp"

#include <fte/error.hpp>
#include <fte/metrics.hpp>

#include <nlohmann/json.hpp>
#include <gtest/gtest.h>

#include <cmath>
#include <functional>
#include <limits>
#include <random>

namespace fte {
namespace {

// Minimum cost over every monotone path from (0,0) to (n-1,m-1), by recursion.
double brute_force_dtw(const std::vector<double>& a, const std::vector<double>& b) {
  double best = std::numeric_limits<double>::infinity();
  std::function<void(std::size_t, std::size_t, double)> walk = [&](std::size_t i, std::size_t j,
                                                                  double cost) {
    cost += std::abs(a[i] - b[j]);
    if (i + 1 == a.size() && j + 1 == b.size()) {
      best = std::min(best, cost);
      return;
    }
    if (i + 1 < a.size()) walk(i + 1, j, cost);
    if (j + 1 < b.size()) walk(i, j + 1, cost);
    if (i + 1 < a.size() && j + 1 < b.size()) walk(i + 1, j + 1, cost);
  };
  walk(0, 0, 0.0);
  return best;
}

Trajectory polyline(const std::vector<Vec3>& points) {
  std::vector<Sample> samples;
  for (std::size_t i = 0; i < points.size(); ++i) {
    samples.push_back({static_cast<double>(i), {points[i], UnitQuaternion::identity()}, 0.0});
  }
  return Trajectory::single_segment(samples);
}

// Densely sampled closed square of side `side` at `corner`, in the z = 0 plane.
std::vector<Vec3> square(const Vec3& corner, double side) {
  const std::vector<Vec3> k{corner, corner + Vec3(side, 0, 0), corner + Vec3(side, side, 0),
                            corner + Vec3(0, side, 0), corner};
  std::vector<Vec3> out;
  for (std::size_t e = 0; e + 1 < k.size(); ++e) {
    for (int i = 0; i < 25; ++i) {
      out.push_back(k[e] + (k[e + 1] - k[e]) * (i / 25.0));
    }
  }
  out.push_back(k.back());
  return out;
}

TEST(Dtw, IdenticalSequencesFollowDiagonal) {
  const std::vector<double> a{0.0, 0.5, 0.2, 1.0};
  const DtwResult r = dtw_scalar(a, a);
  EXPECT_EQ(r.cost, 0.0);
  ASSERT_EQ(r.path.size(), a.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(r.path[i], std::make_pair(i, i));
  }
}

TEST(Dtw, SmallScalarExample) {
  const std::vector<double> a{0, 1, 2};
  const std::vector<double> b{0, 2};
  EXPECT_EQ(dtw_scalar(a, b).cost, 1.0);
  EXPECT_EQ(brute_force_dtw(a, b), 1.0);
}

TEST(DtwProperty, MatchesBruteForceOnAllSmallGrids) {
  std::mt19937_64 rng(71);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (std::size_t n = 1; n <= 12; ++n) {
    for (std::size_t m = 1; n * m <= 12; ++m) {
      for (int trial = 0; trial < 50; ++trial) {
        std::vector<double> a(n), b(m);
        for (auto& v : a) v = u(rng);
        for (auto& v : b) v = u(rng);
        const DtwResult r = dtw_scalar(a, b);
        EXPECT_EQ(r.cost, brute_force_dtw(a, b)) << n << "x" << m;
        // The returned path is monotone, anchored, and realises the cost.
        ASSERT_EQ(r.path.front(), std::make_pair(std::size_t{0}, std::size_t{0}));
        ASSERT_EQ(r.path.back(), std::make_pair(n - 1, m - 1));
        double along = 0.0;
        for (std::size_t k = 0; k < r.path.size(); ++k) {
          along += std::abs(a[r.path[k].first] - b[r.path[k].second]);
          if (k > 0) {
            const auto di = r.path[k].first - r.path[k - 1].first;
            const auto dj = r.path[k].second - r.path[k - 1].second;
            EXPECT_TRUE(di <= 1 && dj <= 1 && di + dj >= 1);
          }
        }
        EXPECT_NEAR(along, r.cost, 1e-12);
      }
    }
  }
}

TEST(DtwProperty, ZeroOnSelfSymmetricNonNegative) {
  std::mt19937_64 rng(72);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = 1 + rng() % 40;
    const std::size_t m = 1 + rng() % 40;
    std::vector<Vec3> a, b;
    std::vector<UnitQuaternion> qa;
    for (std::size_t i = 0; i < n; ++i) {
      a.push_back(testing::random_in_ball(rng, 1.0));
      qa.push_back(testing::random_quaternion(rng));
    }
    for (std::size_t i = 0; i < m; ++i) {
      b.push_back(testing::random_in_ball(rng, 1.0));
    }
    EXPECT_EQ(dtw_positions(a, a).cost, 0.0);
    EXPECT_NEAR(dtw_orientations(qa, qa).cost, 0.0, 1e-12);
    EXPECT_EQ(dtw_positions(a, b).cost, dtw_positions(b, a).cost);
    EXPECT_GE(dtw_positions(a, b).cost, 0.0);
  }
}

TEST(Dtw, TimeReparameterizedCopyIsCheap) {
  std::vector<Vec3> a, b;
  const auto curve = [](double u) { return Vec3(std::cos(3 * u), std::sin(2 * u), u); };
  const int n = 400;
  for (int i = 0; i < n; ++i) {
    const double u = static_cast<double>(i) / (n - 1);
    a.push_back(curve(u));
    b.push_back(curve(u * u));
  }
  double pointwise = 0.0;
  for (int i = 0; i < n; ++i) {
    pointwise += (a[i] - b[i]).norm();
  }
  pointwise /= n;
  EXPECT_LT(dtw_positions(a, b).normalized(), 0.05 * pointwise);
}

TEST(Collision, EmptySpace) {
  const Trajectory t = polyline({Vec3::Zero(), Vec3(1, 0, 0), Vec3(2, 0, 0)});
  const CollisionResult r = collision_check(t, GaussianScene(), 0.3);
  EXPECT_FALSE(r.collided);
  EXPECT_EQ(r.max_density, 0.0);
  EXPECT_FALSE(r.first_violation.has_value());
}

TEST(Collision, ThroughBlobMean) {
  const GaussianScene scene = testing::single_blob_scene(Vec3(0.5, 0, 0), 0.05);
  std::vector<Vec3> pts;
  for (int i = 0; i <= 20; ++i) {
    pts.emplace_back(0.05 * i, 0, 0);
  }
  const Trajectory t = polyline(pts);
  for (const double th : {0.1, 0.5, 0.999}) {
    const CollisionResult r = collision_check(t, scene, th);
    EXPECT_TRUE(r.collided);
    EXPECT_GE(r.max_density, th);
  }
  EXPECT_EQ(collision_check(t, scene, 0.999).first_violation, std::optional<std::size_t>(10));
}

TEST(Collision, RateArithmetic) {
  std::vector<CollisionResult> results(40);
  for (int i = 0; i < 8; ++i) {
    results[static_cast<std::size_t>(5 * i)].collided = true;
  }
  EXPECT_DOUBLE_EQ(collision_rate(results), 0.2);
  EXPECT_EQ(collision_rate({}), 0.0);
}

TEST(CollisionProperty, MaxDensityMatchesBruteForce) {
  std::mt19937_64 rng(73);
  const auto blobs = testing::random_blobs(rng, 300, 0.5, 0.02, 0.1);
  const GaussianScene scene(blobs, 0.0);
  for (int trial = 0; trial < 10; ++trial) {
    std::vector<Vec3> pts;
    Vec3 p = testing::random_in_ball(rng, 0.5);
    for (int i = 0; i < 100; ++i) {
      p += testing::random_in_ball(rng, 0.02);
      pts.push_back(p);
    }
    double expected = 0.0;
    for (const Vec3& x : pts) {
      expected = std::max(expected, testing::brute_force_density(blobs, x));
    }
    const CollisionResult r = collision_check(polyline(pts), scene, 10.0);
    EXPECT_NEAR(r.max_density, expected, 1e-6 * expected);
    EXPECT_EQ(r.collided, r.max_density > 10.0);
  }
}

TEST(Raster, SquareOutlinePixelCount) {
  const auto pts = square(Vec3::Zero(), 1.0);
  const Raster r = rasterize_stroke(pts, {});
  ASSERT_EQ(r.size, 128);
  // Outline at pixel centers 1 and 126, dilated by one pixel each side, so
  // rows and columns 3..124 stay blank inside.
  EXPECT_EQ(r.ink(), 128u * 128u - 122u * 122u);
  EXPECT_TRUE(r.at(0, 0));
  EXPECT_TRUE(r.at(127, 127));
  EXPECT_FALSE(r.at(3, 3));
  EXPECT_FALSE(r.at(64, 64));
}

TEST(Raster, Errors) {
  const std::vector<Vec3> line{Vec3::Zero(), Vec3(1, 0, 0)};
  EXPECT_THROW(rasterize_stroke(line, {}), MetricError);
  RasterOptions tiny;
  tiny.resolution = 4;
  EXPECT_THROW(rasterize_stroke(square(Vec3::Zero(), 1.0), tiny), MetricError);
  EXPECT_EQ(rasterize_stroke({}, {}).ink(), 0u);
  const Raster blank = rasterize_stroke({}, {});
  EXPECT_THROW(normalized_l1(blank, blank), MetricError);
}

TEST(WritingError, Identities) {
  const Trajectory expert = testing::letter_a_demo();
  EXPECT_EQ(writing_error(expert, expert), 0.0);
  EXPECT_EQ(writing_error(expert, Trajectory()), 1.0);
}

TEST(WritingError, ShiftedRasterMatchesPixelCountOracle) {
  const Trajectory expert = testing::letter_a_demo();
  RasterOptions options;
  const auto points = expert.positions();
  const Raster reference = rasterize_stroke(points, options);
  // Shift the drawn image by two stroke widths to the right.
  const int shift = 2 * options.stroke_px;
  Raster shifted = reference;
  std::fill(shifted.pixels.begin(), shifted.pixels.end(), 0);
  for (int row = 0; row < reference.size; ++row) {
    for (int col = 0; col + shift < reference.size; ++col) {
      shifted.pixels[static_cast<std::size_t>(row * reference.size + col + shift)] =
          reference.pixels[static_cast<std::size_t>(row * reference.size + col)];
    }
  }
  std::size_t differing = 0;
  std::size_t ink = 0;
  for (std::size_t i = 0; i < reference.pixels.size(); ++i) {
    differing += (reference.pixels[i] != 0) != (shifted.pixels[i] != 0);
    ink += reference.pixels[i] != 0;
  }
  const double expected = static_cast<double>(differing) / static_cast<double>(ink);
  const double e = normalized_l1(shifted, reference);
  EXPECT_EQ(e, expected);
  EXPECT_GT(e, 0.0);
  EXPECT_LE(e, 2.0);
}

TEST(WritingErrorProperty, InvariantToInPlaneTranslationAndScale) {
  std::mt19937_64 rng(74);
  const Trajectory expert = testing::letter_a_demo();
  std::uniform_real_distribution<double> shift(-0.2, 0.2);
  std::uniform_real_distribution<double> scale(0.5, 2.0);
  for (int trial = 0; trial < 30; ++trial) {
    const Vec3 t(shift(rng), shift(rng), 0.0);
    const double s = scale(rng);
    std::vector<Sample> moved = expert.samples();
    for (Sample& sample : moved) {
      sample.pose.position = s * sample.pose.position + t;
      sample.pose.position.z() = expert[0].pose.position.z();
    }
    const Trajectory executed(moved, expert.splits());
    EXPECT_NEAR(writing_error(expert, executed), 0.0, 0.02) << "trial " << trial;
  }
}

TEST(WritingError, DifferentShapeIsPenalized) {
  const Trajectory expert = polyline(square(Vec3::Zero(), 1.0));
  std::vector<Vec3> diagonal;
  for (int i = 0; i <= 50; ++i) {
    diagonal.emplace_back(i / 50.0, i / 50.0, 0.0);
  }
  const double e = writing_error(expert, polyline(diagonal));
  EXPECT_GT(e, 0.9);
}

TEST(Eval, ReportAndSummaries) {
  const Trajectory expert = testing::letter_a_demo();
  const GaussianScene scene = testing::single_blob_scene(expert[10].pose.position, 0.01);
  EvalOptions options;
  options.scene = &scene;
  options.rho_th = 0.3;
  options.writing = RasterOptions{};
  const EvalReport self = evaluate_rollout(expert, expert, options, "self");
  EXPECT_EQ(self.dtw_position, 0.0);
  EXPECT_EQ(self.dtw_orientation, 0.0);
  EXPECT_TRUE(self.collided);
  EXPECT_EQ(self.writing_error, std::optional<double>(0.0));

  EvalReport other;
  other.name = "other";
  other.dtw_position = 0.5;
  other.max_density = 0.1;
  const std::vector<EvalReport> reports{self, other};
  const std::string csv = summary_csv(reports);
  EXPECT_EQ(csv.substr(0, csv.find('\n')),
            "rollout,dtw_position,dtw_orientation,collided,max_density,writing_error");
  EXPECT_NE(csv.find("\nother,0.5,0,0,0.1,\n"), std::string::npos);
  const auto agg = nlohmann::json::parse(aggregate_json(reports));
  EXPECT_EQ(agg["count"], 2);
  EXPECT_DOUBLE_EQ(agg["dtw_position"]["mean"].get<double>(), 0.25);
  EXPECT_DOUBLE_EQ(agg["dtw_position"]["std"].get<double>(), 0.25);
  EXPECT_DOUBLE_EQ(agg["collision_rate"].get<double>(), 0.5);
}

TEST(Raster, PgmHeader) {
  const Raster r = rasterize_stroke(square(Vec3::Zero(), 1.0), {});
  const std::string pgm = raster_to_pgm(r);
  EXPECT_EQ(pgm.substr(0, 15), "P5\n128 128\n255\n");
  EXPECT_EQ(pgm.size(), 15u + 128u * 128u);
}

}  // namespace
}  // namespace fte
