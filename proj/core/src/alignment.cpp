#include "fte/alignment.hpp"

#include "fte/error.hpp"
#include "fte/scene_io.hpp"
#include "fte/text_io.hpp"

#include <Eigen/SVD>
#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace fte {
namespace {

/// Static 3-d tree for nearest-neighbour lookups. Ties resolve to the lowest index.
class KdTree {
 public:
  explicit KdTree(std::span<const Vec3> points) : points_(points) {
    order_.resize(points.size());
    std::iota(order_.begin(), order_.end(), std::size_t{0});
    nodes_.reserve(points.size());
    build(0, order_.size(), 0);
  }

  /// Returns (index, squared distance) of the nearest point.
  std::pair<std::size_t, double> nearest(const Vec3& query) const {
    std::size_t best = std::numeric_limits<std::size_t>::max();
    double best_d2 = std::numeric_limits<double>::infinity();
    if (!nodes_.empty()) {
      search(0, query, best, best_d2);
    }
    return {best, best_d2};
  }

 private:
  struct Node {
    std::size_t point;
    int axis;
    std::ptrdiff_t left = -1;
    std::ptrdiff_t right = -1;
  };

  std::ptrdiff_t build(std::size_t begin, std::size_t end, int depth) {
    if (begin >= end) {
      return -1;
    }
    const int axis = depth % 3;
    const std::size_t mid = begin + (end - begin) / 2;
    std::nth_element(order_.begin() + static_cast<std::ptrdiff_t>(begin),
                     order_.begin() + static_cast<std::ptrdiff_t>(mid),
                     order_.begin() + static_cast<std::ptrdiff_t>(end),
                     [&](std::size_t a, std::size_t b) {
                       const double pa = points_[a][axis];
                       const double pb = points_[b][axis];
                       return pa < pb || (pa == pb && a < b);
                     });
    const auto id = static_cast<std::ptrdiff_t>(nodes_.size());
    nodes_.push_back({order_[mid], axis});
    const std::ptrdiff_t left = build(begin, mid, depth + 1);
    const std::ptrdiff_t right = build(mid + 1, end, depth + 1);
    nodes_[static_cast<std::size_t>(id)].left = left;
    nodes_[static_cast<std::size_t>(id)].right = right;
    return id;
  }

  void search(std::ptrdiff_t id, const Vec3& query, std::size_t& best, double& best_d2) const {
    if (id < 0) {
      return;
    }
    const Node& node = nodes_[static_cast<std::size_t>(id)];
    const Vec3& p = points_[node.point];
    const double d2 = (p - query).squaredNorm();
    if (d2 < best_d2 || (d2 == best_d2 && node.point < best)) {
      best = node.point;
      best_d2 = d2;
    }
    const double delta = query[node.axis] - p[node.axis];
    const std::ptrdiff_t near = delta < 0.0 ? node.left : node.right;
    const std::ptrdiff_t far = delta < 0.0 ? node.right : node.left;
    search(near, query, best, best_d2);
    if (delta * delta <= best_d2) {
      search(far, query, best, best_d2);
    }
  }

  std::span<const Vec3> points_;
  std::vector<std::size_t> order_;
  std::vector<Node> nodes_;
};

}  // namespace

RigidTransform RigidTransform::inverse() const {
  return {rotation.transpose(), -(rotation.transpose() * translation)};
}

RigidTransform RigidTransform::operator*(const RigidTransform& rhs) const {
  return {rotation * rhs.rotation, rotation * rhs.translation + translation};
}

bool RigidTransform::is_valid(double tolerance) const {
  return rotation.allFinite() && is_finite(translation) &&
         (rotation.transpose() * rotation - Mat3::Identity()).cwiseAbs().maxCoeff() <= tolerance &&
         std::abs(rotation.determinant() - 1.0) <= tolerance;
}

RigidTransform fit_rigid_transform(std::span<const Vec3> source, std::span<const Vec3> target) {
  if (source.size() != target.size() || source.size() < 3) {
    throw AlignmentError("rigid fit needs at least 3 paired points");
  }
  Vec3 source_mean = Vec3::Zero();
  Vec3 target_mean = Vec3::Zero();
  for (std::size_t i = 0; i < source.size(); ++i) {
    source_mean += source[i];
    target_mean += target[i];
  }
  source_mean /= static_cast<double>(source.size());
  target_mean /= static_cast<double>(target.size());

  Mat3 cross = Mat3::Zero();
  for (std::size_t i = 0; i < source.size(); ++i) {
    cross += (source[i] - source_mean) * (target[i] - target_mean).transpose();
  }
  const Eigen::JacobiSVD<Mat3> svd(cross, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const Vec3 sv = svd.singularValues();
  if (!(sv[0] > 0.0) || sv[1] <= 1e-12 * sv[0]) {
    throw AlignmentError("degenerate point configuration (cross-covariance rank < 2)");
  }
  const Mat3 u = svd.matrixU();
  const Mat3 v = svd.matrixV();
  Mat3 correction = Mat3::Identity();
  correction(2, 2) = (v * u.transpose()).determinant() < 0.0 ? -1.0 : 1.0;
  RigidTransform out;
  out.rotation = v * correction * u.transpose();
  out.translation = target_mean - out.rotation * source_mean;
  return out;
}

IcpResult icp_align(std::span<const Vec3> source, std::span<const Vec3> target,
                    const IcpParams& params) {
  if (source.size() < 3 || target.size() < 3) {
    throw AlignmentError("ICP needs at least 3 points in each set");
  }
  const KdTree tree(target);
  const double max_d2 = params.max_corr_dist * params.max_corr_dist;

  IcpResult result;
  result.transform = params.initial;
  std::vector<Vec3> matched_source;
  std::vector<Vec3> matched_target;
  double previous = std::numeric_limits<double>::infinity();

  for (std::size_t iter = 0; iter < params.max_iters; ++iter) {
    matched_source.clear();
    matched_target.clear();
    for (const Vec3& p : source) {
      const auto [index, d2] = tree.nearest(result.transform.apply(p));
      if (d2 <= max_d2) {
        matched_source.push_back(p);
        matched_target.push_back(target[index]);
      }
    }
    if (matched_source.size() < 3) {
      throw AlignmentError("no correspondences within max_corr_dist");
    }
    result.transform = fit_rigid_transform(matched_source, matched_target);

    double sum = 0.0;
    for (std::size_t i = 0; i < matched_source.size(); ++i) {
      sum += (result.transform.apply(matched_source[i]) - matched_target[i]).squaredNorm();
    }
    result.residual = std::sqrt(sum / static_cast<double>(matched_source.size()));
    result.inliers = matched_source.size();
    result.residual_history.push_back(result.residual);
    if (std::abs(previous - result.residual) < params.tol) {
      break;
    }
    previous = result.residual;
  }
  return result;
}

GaussianScene apply_transform(const GaussianScene& scene, const RigidTransform& transform) {
  std::vector<GaussianBlob> blobs;
  blobs.reserve(scene.size());
  const Mat3& r = transform.rotation;
  for (const auto& blob : scene.blobs()) {
    Mat3 cov = r * blob.covariance() * r.transpose();
    cov = 0.5 * (cov + cov.transpose()).eval();
    blobs.emplace_back(transform.apply(blob.mean()), cov, blob.opacity(), blob.cutoff_sigmas());
  }
  return GaussianScene(std::move(blobs), scene.opacity_floor(), scene.rejected_count());
}

std::vector<Vec3> read_point_set(const std::filesystem::path& path) {
  if (path.extension() == ".json") {
    SceneLoadOptions options;
    options.opacity_floor = 0.0;
    const GaussianScene scene = load_scene(path, options);
    std::vector<Vec3> points;
    for (const auto& blob : scene.blobs()) {
      points.push_back(blob.mean());
    }
    return points;
  }
  const std::string text = read_text_file(path);
  std::vector<Vec3> points;
  bool first = true;
  for (std::string_view line : split_fields(text, '\n')) {
    if (line.empty() || line.front() == '#') {
      continue;
    }
    const auto fields = split_fields(line);
    if (first && !fields.empty() && !fields[0].empty() &&
        std::isalpha(static_cast<unsigned char>(fields[0].front()))) {
      first = false;
      continue;
    }
    first = false;
    if (fields.size() < 3) {
      throw FormatError("point set line needs x,y,z: " + std::string(line));
    }
    points.emplace_back(parse_number(fields[0], path.string()), parse_number(fields[1], path.string()),
                        parse_number(fields[2], path.string()));
  }
  return points;
}

std::string transform_to_json(const RigidTransform& transform) {
  nlohmann::json rows = nlohmann::json::array();
  for (int i = 0; i < 3; ++i) {
    rows.push_back({transform.rotation(i, 0), transform.rotation(i, 1), transform.rotation(i, 2),
                    transform.translation[i]});
  }
  rows.push_back({0.0, 0.0, 0.0, 1.0});
  return nlohmann::json{{"matrix", rows}}.dump(1) + "\n";
}

RigidTransform parse_transform_json(std::string_view text) {
  RigidTransform out;
  try {
    const auto doc = nlohmann::json::parse(text);
    const auto& rows = doc.at("matrix");
    if (rows.size() != 4) {
      throw FormatError("transform matrix must be 4x4");
    }
    for (int i = 0; i < 3; ++i) {
      if (rows.at(i).size() != 4) {
        throw FormatError("transform matrix must be 4x4");
      }
      for (int j = 0; j < 3; ++j) {
        out.rotation(i, j) = rows.at(i).at(j).get<double>();
      }
      out.translation[i] = rows.at(i).at(3).get<double>();
    }
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("transform JSON: ") + e.what());
  }
  if (!out.is_valid(1e-6)) {
    throw FormatError("transform JSON rotation is not a proper rotation");
  }
  return out;
}

}  // namespace fte
