#include "fte/metrics.hpp"

#include "fte/error.hpp"
#include "fte/text_io.hpp"

#include <nlohmann/json.hpp>

#include <cmath>
#include <cstdlib>

namespace fte {
namespace {

struct PlaneBasis {
  Vec3 origin;
  Vec3 u;
  Vec3 v;
};

PlaneBasis plane_basis(const WritingPlane& plane) {
  const Vec3 n = plane.normal.normalized();
  int axis = 0;
  for (int d = 1; d < 3; ++d) {
    if (std::abs(n[d]) < std::abs(n[axis])) {
      axis = d;
    }
  }
  const Vec3 e = Vec3::Unit(axis);
  const Vec3 u = (e - e.dot(n) * n).normalized();
  return {plane.point, u, n.cross(u)};
}

void stamp(Raster& raster, int row, int col, int stroke_px) {
  const int lo = -(stroke_px / 2);
  const int hi = lo + stroke_px - 1;
  for (int dr = lo; dr <= hi; ++dr) {
    for (int dc = lo; dc <= hi; ++dc) {
      const int r = row + dr;
      const int c = col + dc;
      if (r >= 0 && r < raster.size && c >= 0 && c < raster.size) {
        raster.pixels[static_cast<std::size_t>(r * raster.size + c)] = 1;
      }
    }
  }
}

void draw_line(Raster& raster, int r0, int c0, int r1, int c1, int stroke_px) {
  const int dc = std::abs(c1 - c0);
  const int dr = -std::abs(r1 - r0);
  const int sc = c0 < c1 ? 1 : -1;
  const int sr = r0 < r1 ? 1 : -1;
  int err = dc + dr;
  while (true) {
    stamp(raster, r0, c0, stroke_px);
    if (r0 == r1 && c0 == c1) {
      break;
    }
    const int e2 = 2 * err;
    if (e2 >= dr) {
      err += dr;
      c0 += sc;
    }
    if (e2 <= dc) {
      err += dc;
      r0 += sr;
    }
  }
}

struct Stats {
  double mean = 0.0;
  double std = 0.0;
};

Stats stats_of(const std::vector<double>& values) {
  Stats s;
  if (values.empty()) {
    return s;
  }
  for (const double v : values) {
    s.mean += v;
  }
  s.mean /= static_cast<double>(values.size());
  for (const double v : values) {
    s.std += (v - s.mean) * (v - s.mean);
  }
  s.std = std::sqrt(s.std / static_cast<double>(values.size()));
  return s;
}

}  // namespace

DtwResult dtw_positions(std::span<const Vec3> a, std::span<const Vec3> b) {
  return dtw(a, b, [](const Vec3& p, const Vec3& q) { return (p - q).norm(); });
}

DtwResult dtw_orientations(std::span<const UnitQuaternion> a, std::span<const UnitQuaternion> b) {
  return dtw(a, b, [](const UnitQuaternion& p, const UnitQuaternion& q) {
    return quat_geodesic_distance(p, q);
  });
}

DtwResult dtw_scalar(std::span<const double> a, std::span<const double> b) {
  return dtw(a, b, [](double p, double q) { return std::abs(p - q); });
}

CollisionResult collision_check(const Trajectory& trajectory, const GaussianScene& scene,
                                double rho_th) {
  CollisionResult result;
  for (std::size_t i = 0; i < trajectory.size(); ++i) {
    const double rho = scene.density(trajectory[i].pose.position);
    result.max_density = std::max(result.max_density, rho);
    if (rho > rho_th && !result.first_violation) {
      result.first_violation = i;
      result.collided = true;
    }
  }
  return result;
}

double collision_rate(std::span<const CollisionResult> results) {
  if (results.empty()) {
    return 0.0;
  }
  std::size_t hits = 0;
  for (const auto& r : results) {
    hits += r.collided ? 1 : 0;
  }
  return static_cast<double>(hits) / static_cast<double>(results.size());
}

std::size_t Raster::ink() const {
  std::size_t count = 0;
  for (const auto p : pixels) {
    count += p;
  }
  return count;
}

Raster rasterize_stroke(std::span<const Vec3> points, const RasterOptions& options) {
  if (options.resolution < 8 || options.stroke_px < 1 || options.stroke_px * 4 > options.resolution) {
    throw MetricError("raster resolution or stroke width out of range");
  }
  Raster raster;
  raster.size = options.resolution;
  raster.pixels.assign(static_cast<std::size_t>(raster.size * raster.size), 0);
  if (points.empty()) {
    return raster;
  }
  const PlaneBasis basis = plane_basis(options.plane);
  std::vector<Eigen::Vector2d> projected;
  projected.reserve(points.size());
  Eigen::Vector2d lo = Eigen::Vector2d::Constant(std::numeric_limits<double>::infinity());
  Eigen::Vector2d hi = -lo;
  for (const Vec3& p : points) {
    const Vec3 d = p - basis.origin;
    const Eigen::Vector2d q(d.dot(basis.u), d.dot(basis.v));
    projected.push_back(q);
    lo = lo.cwiseMin(q);
    hi = hi.cwiseMax(q);
  }
  const Eigen::Vector2d extent = hi - lo;
  if (!(extent.x() > 0.0) || !(extent.y() > 0.0)) {
    throw MetricError("stroke bounding box has zero area");
  }
  const double margin = options.stroke_px / 2;
  const double span = static_cast<double>(options.resolution - 1) - 2.0 * margin;
  const double scale = span / extent.maxCoeff();
  const Eigen::Vector2d offset =
      Eigen::Vector2d::Constant(margin) + 0.5 * (Eigen::Vector2d::Constant(span) - scale * extent);

  const auto to_pixel = [&](const Eigen::Vector2d& q) {
    const Eigen::Vector2d p = offset + scale * (q - lo);
    const int col = static_cast<int>(std::lround(p.x()));
    const int row = options.resolution - 1 - static_cast<int>(std::lround(p.y()));
    return std::pair{row, col};
  };
  auto [r0, c0] = to_pixel(projected.front());
  stamp(raster, r0, c0, options.stroke_px);
  for (std::size_t i = 1; i < projected.size(); ++i) {
    const auto [r1, c1] = to_pixel(projected[i]);
    draw_line(raster, r0, c0, r1, c1, options.stroke_px);
    r0 = r1;
    c0 = c1;
  }
  return raster;
}

double normalized_l1(const Raster& executed, const Raster& expert) {
  if (executed.size != expert.size) {
    throw MetricError("raster sizes differ");
  }
  const std::size_t ink = expert.ink();
  if (ink == 0) {
    throw MetricError("expert raster is empty");
  }
  std::size_t diff = 0;
  for (std::size_t i = 0; i < expert.pixels.size(); ++i) {
    diff += executed.pixels[i] != expert.pixels[i] ? 1 : 0;
  }
  return static_cast<double>(diff) / static_cast<double>(ink);
}

double writing_error(const Trajectory& expert, const Trajectory& executed,
                     const RasterOptions& options) {
  const auto expert_points = expert.positions();
  const auto executed_points = executed.positions();
  return normalized_l1(rasterize_stroke(executed_points, options),
                       rasterize_stroke(expert_points, options));
}

std::string raster_to_pgm(const Raster& raster) {
  std::string out = "P5\n" + std::to_string(raster.size) + " " + std::to_string(raster.size) + "\n255\n";
  for (const auto p : raster.pixels) {
    out += static_cast<char>(p ? 0 : 255);
  }
  return out;
}

EvalReport evaluate_rollout(const Trajectory& expert, const Trajectory& rollout,
                            const EvalOptions& options, std::string name) {
  EvalReport report;
  report.name = std::move(name);
  const auto expert_positions = expert.positions();
  const auto rollout_positions = rollout.positions();
  report.dtw_position = dtw_positions(expert_positions, rollout_positions).normalized();
  const auto expert_orientations = expert.orientations();
  const auto rollout_orientations = rollout.orientations();
  report.dtw_orientation = dtw_orientations(expert_orientations, rollout_orientations).normalized();
  if (options.scene != nullptr) {
    const CollisionResult c = collision_check(rollout, *options.scene, options.rho_th);
    report.collided = c.collided;
    report.max_density = c.max_density;
  }
  if (options.writing) {
    report.writing_error = writing_error(expert, rollout, *options.writing);
  }
  return report;
}

std::string summary_csv(std::span<const EvalReport> reports) {
  std::string out = "rollout,dtw_position,dtw_orientation,collided,max_density,writing_error\n";
  for (const auto& r : reports) {
    out += r.name + "," + format_number(r.dtw_position) + "," + format_number(r.dtw_orientation) +
           "," + (r.collided ? "1" : "0") + "," + format_number(r.max_density) + "," +
           (r.writing_error ? format_number(*r.writing_error) : std::string()) + "\n";
  }
  return out;
}

std::string aggregate_json(std::span<const EvalReport> reports) {
  std::vector<double> dtw_p, dtw_o, rho, write;
  std::size_t collided = 0;
  for (const auto& r : reports) {
    dtw_p.push_back(r.dtw_position);
    dtw_o.push_back(r.dtw_orientation);
    rho.push_back(r.max_density);
    if (r.writing_error) {
      write.push_back(*r.writing_error);
    }
    collided += r.collided ? 1 : 0;
  }
  const auto entry = [](const std::vector<double>& v) {
    const Stats s = stats_of(v);
    return nlohmann::json{{"mean", s.mean}, {"std", s.std}};
  };
  nlohmann::json doc = {
      {"count", reports.size()},
      {"dtw_position", entry(dtw_p)},
      {"dtw_orientation", entry(dtw_o)},
      {"max_density", entry(rho)},
      {"collision_rate",
       reports.empty() ? 0.0 : static_cast<double>(collided) / static_cast<double>(reports.size())}};
  if (!write.empty()) {
    doc["writing_error"] = entry(write);
  }
  return doc.dump(1) + "\n";
}

}  // namespace fte
