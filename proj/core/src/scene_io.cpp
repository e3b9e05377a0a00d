#include "fte/scene_io.hpp"

#include "fte/error.hpp"
#include "fte/text_io.hpp"

#include <nlohmann/json.hpp>

#include <Eigen/Eigenvalues>

#include <array>
#include <bit>
#include <cmath>
#include <cstring>
#include <map>
#include <optional>
#include <sstream>

namespace fte {
namespace {

enum class PlyType { kInt8, kUint8, kInt16, kUint16, kInt32, kUint32, kFloat32, kFloat64 };

std::optional<PlyType> ply_type(std::string_view name) {
  static const std::map<std::string_view, PlyType> kTypes = {
      {"char", PlyType::kInt8},     {"int8", PlyType::kInt8},     {"uchar", PlyType::kUint8},
      {"uint8", PlyType::kUint8},   {"short", PlyType::kInt16},   {"int16", PlyType::kInt16},
      {"ushort", PlyType::kUint16}, {"uint16", PlyType::kUint16}, {"int", PlyType::kInt32},
      {"int32", PlyType::kInt32},   {"uint", PlyType::kUint32},   {"uint32", PlyType::kUint32},
      {"float", PlyType::kFloat32}, {"float32", PlyType::kFloat32}, {"double", PlyType::kFloat64},
      {"float64", PlyType::kFloat64}};
  const auto it = kTypes.find(name);
  if (it == kTypes.end()) {
    return std::nullopt;
  }
  return it->second;
}

std::size_t type_size(PlyType type) {
  switch (type) {
    case PlyType::kInt8:
    case PlyType::kUint8:
      return 1;
    case PlyType::kInt16:
    case PlyType::kUint16:
      return 2;
    case PlyType::kInt32:
    case PlyType::kUint32:
    case PlyType::kFloat32:
      return 4;
    case PlyType::kFloat64:
      return 8;
  }
  return 0;
}

template <typename T>
T load_le(const char* p) {
  static_assert(std::endian::native == std::endian::little, "big-endian hosts unsupported");
  T value;
  std::memcpy(&value, p, sizeof(T));
  return value;
}

double read_binary(PlyType type, const char* p) {
  switch (type) {
    case PlyType::kInt8:
      return load_le<std::int8_t>(p);
    case PlyType::kUint8:
      return load_le<std::uint8_t>(p);
    case PlyType::kInt16:
      return load_le<std::int16_t>(p);
    case PlyType::kUint16:
      return load_le<std::uint16_t>(p);
    case PlyType::kInt32:
      return load_le<std::int32_t>(p);
    case PlyType::kUint32:
      return load_le<std::uint32_t>(p);
    case PlyType::kFloat32:
      return load_le<float>(p);
    case PlyType::kFloat64:
      return load_le<double>(p);
  }
  return 0.0;
}

struct PlyProperty {
  std::string name;
  PlyType type;
};

struct PlyHeader {
  bool binary = false;
  std::size_t vertex_count = 0;
  std::vector<PlyProperty> properties;
  std::size_t body_offset = 0;
};

PlyHeader parse_ply_header(std::string_view bytes) {
  const std::size_t end = bytes.find("end_header");
  if (!bytes.starts_with("ply") || end == std::string_view::npos) {
    throw FormatError("not a PLY file");
  }
  const std::size_t newline = bytes.find('\n', end);
  if (newline == std::string_view::npos) {
    throw FormatError("PLY header not terminated");
  }
  PlyHeader header;
  header.body_offset = newline + 1;

  bool in_vertex = false;
  bool seen_element = false;
  for (std::string_view line : split_fields(bytes.substr(0, end), '\n')) {
    std::istringstream in{std::string(line)};
    std::string keyword;
    in >> keyword;
    if (keyword == "format") {
      std::string format;
      in >> format;
      if (format == "ascii") {
        header.binary = false;
      } else if (format == "binary_little_endian") {
        header.binary = true;
      } else {
        throw FormatError("unsupported PLY format: " + format);
      }
    } else if (keyword == "element") {
      std::string name;
      std::size_t count = 0;
      in >> name >> count;
      if (!seen_element && name != "vertex") {
        throw FormatError("PLY vertex element must come first");
      }
      in_vertex = name == "vertex";
      if (in_vertex) {
        header.vertex_count = count;
      }
      seen_element = true;
    } else if (keyword == "property" && in_vertex) {
      std::string type_name;
      std::string name;
      in >> type_name >> name;
      if (type_name == "list") {
        throw FormatError("list properties are not supported in the vertex element");
      }
      const auto type = ply_type(type_name);
      if (!type) {
        throw FormatError("unknown PLY property type: " + type_name);
      }
      header.properties.push_back({name, *type});
    }
  }
  if (!seen_element) {
    throw FormatError("PLY has no vertex element");
  }
  return header;
}

double logistic(double v) { return 1.0 / (1.0 + std::exp(-v)); }

}  // namespace

GaussianScene parse_scene_ply(std::string_view bytes, const SceneLoadOptions& options) {
  const PlyHeader header = parse_ply_header(bytes);

  static constexpr std::array<std::string_view, 11> kRequired = {
      "x", "y", "z", "scale_0", "scale_1", "scale_2", "rot_0", "rot_1", "rot_2", "rot_3", "opacity"};
  std::array<std::size_t, kRequired.size()> column{};
  for (std::size_t r = 0; r < kRequired.size(); ++r) {
    bool found = false;
    for (std::size_t p = 0; p < header.properties.size(); ++p) {
      if (header.properties[p].name == kRequired[r]) {
        column[r] = p;
        found = true;
        break;
      }
    }
    if (!found) {
      throw FormatError("PLY missing vertex property '" + std::string(kRequired[r]) + "'");
    }
  }

  std::vector<double> row(header.properties.size());
  std::vector<GaussianBlob> blobs;
  blobs.reserve(header.vertex_count);
  std::size_t rejected = 0;

  const std::string_view body = bytes.substr(header.body_offset);
  std::size_t record_size = 0;
  for (const auto& p : header.properties) {
    record_size += type_size(p.type);
  }
  std::vector<std::string_view> ascii_lines;
  if (header.binary) {
    if (body.size() < record_size * header.vertex_count) {
      throw FormatError("PLY body truncated");
    }
  } else {
    for (std::string_view line : split_fields(body, '\n')) {
      if (!line.empty()) {
        ascii_lines.push_back(line);
      }
    }
    if (ascii_lines.size() < header.vertex_count) {
      throw FormatError("PLY body truncated");
    }
  }

  for (std::size_t v = 0; v < header.vertex_count; ++v) {
    if (header.binary) {
      const char* p = body.data() + v * record_size;
      for (std::size_t c = 0; c < header.properties.size(); ++c) {
        row[c] = read_binary(header.properties[c].type, p);
        p += type_size(header.properties[c].type);
      }
    } else {
      std::istringstream in{std::string(ascii_lines[v])};
      for (double& value : row) {
        if (!(in >> value)) {
          throw FormatError("PLY ascii vertex " + std::to_string(v) + " is malformed");
        }
      }
    }
    const auto at = [&](std::size_t r) { return row[column[r]]; };
    const bool pre = options.activation == PlyActivation::kPreActivation;
    try {
      Vec3 scale(at(3), at(4), at(5));
      if (pre) {
        scale = scale.array().exp();
      }
      const UnitQuaternion q(at(6), at(7), at(8), at(9));
      const Mat3 rotation = q.to_matrix();
      const Mat3 covariance =
          rotation * scale.cwiseProduct(scale).asDiagonal() * rotation.transpose();
      const double alpha = pre ? logistic(at(10)) : at(10);
      blobs.emplace_back(Vec3(at(0), at(1), at(2)), 0.5 * (covariance + covariance.transpose()),
                         alpha, options.cutoff_sigmas);
    } catch (const FormatError&) {
      ++rejected;
    }
  }
  return GaussianScene(std::move(blobs), options.opacity_floor, rejected);
}

GaussianScene parse_scene_json(std::string_view text, const SceneLoadOptions& options) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("scene JSON: ") + e.what());
  }
  if (!doc.is_object() || !doc.contains("blobs") || !doc["blobs"].is_array()) {
    throw FormatError("scene JSON must contain a \"blobs\" array");
  }
  std::vector<GaussianBlob> blobs;
  std::size_t rejected = 0;
  std::size_t index = 0;
  for (const auto& entry : doc["blobs"]) {
    const std::string where = "scene JSON blob " + std::to_string(index++);
    if (!entry.contains("mu") || !entry.contains("cov") || !entry.contains("alpha")) {
      throw FormatError(where + " needs mu, cov and alpha");
    }
    Vec3 mean;
    Mat3 cov;
    double alpha = 0.0;
    try {
      const auto& mu = entry["mu"];
      const auto& c = entry["cov"];
      if (mu.size() != 3 || c.size() != 3) {
        throw FormatError(where + " has wrong mu/cov shape");
      }
      for (int i = 0; i < 3; ++i) {
        mean[i] = mu.at(i).get<double>();
        if (c.at(i).size() != 3) {
          throw FormatError(where + " has wrong cov shape");
        }
        for (int j = 0; j < 3; ++j) {
          cov(i, j) = c.at(i).at(j).get<double>();
        }
      }
      alpha = entry["alpha"].get<double>();
    } catch (const nlohmann::json::exception& e) {
      throw FormatError(where + ": " + e.what());
    }
    try {
      blobs.emplace_back(mean, cov, alpha, options.cutoff_sigmas);
    } catch (const FormatError&) {
      ++rejected;
    }
  }
  return GaussianScene(std::move(blobs), options.opacity_floor, rejected);
}

GaussianScene load_scene(const std::filesystem::path& path, const SceneLoadOptions& options) {
  const std::string bytes = read_text_file(path);
  if (path.extension() == ".ply") {
    return parse_scene_ply(bytes, options);
  }
  return parse_scene_json(bytes, options);
}

std::string scene_to_json(const GaussianScene& scene) {
  nlohmann::json blobs = nlohmann::json::array();
  for (const auto& blob : scene.blobs()) {
    const Vec3& mu = blob.mean();
    const Mat3& c = blob.covariance();
    blobs.push_back({{"mu", {mu.x(), mu.y(), mu.z()}},
                     {"cov",
                      {{c(0, 0), c(0, 1), c(0, 2)},
                       {c(1, 0), c(1, 1), c(1, 2)},
                       {c(2, 0), c(2, 1), c(2, 2)}}},
                     {"alpha", blob.opacity()}});
  }
  return nlohmann::json{{"blobs", blobs}}.dump(1) + "\n";
}

std::string scene_to_ply(const GaussianScene& scene) {
  std::string out = "ply\nformat binary_little_endian 1.0\nelement vertex " +
                    std::to_string(scene.size()) + "\n";
  for (const char* name : {"x", "y", "z", "scale_0", "scale_1", "scale_2", "rot_0", "rot_1",
                           "rot_2", "rot_3", "opacity"}) {
    out += "property float ";
    out += name;
    out += '\n';
  }
  out += "end_header\n";
  for (const auto& blob : scene.blobs()) {
    const Eigen::SelfAdjointEigenSolver<Mat3> eig(blob.covariance());
    Mat3 rotation = eig.eigenvectors();
    if (rotation.determinant() < 0.0) {
      rotation.col(2) *= -1.0;
    }
    const UnitQuaternion q = UnitQuaternion::from_matrix(rotation);
    const double alpha = std::min(blob.opacity(), 1.0 - 1e-7);
    const std::array<float, 11> values = {
        static_cast<float>(blob.mean().x()),
        static_cast<float>(blob.mean().y()),
        static_cast<float>(blob.mean().z()),
        static_cast<float>(0.5 * std::log(eig.eigenvalues()[0])),
        static_cast<float>(0.5 * std::log(eig.eigenvalues()[1])),
        static_cast<float>(0.5 * std::log(eig.eigenvalues()[2])),
        static_cast<float>(q.w()),
        static_cast<float>(q.x()),
        static_cast<float>(q.y()),
        static_cast<float>(q.z()),
        static_cast<float>(std::log(alpha / (1.0 - alpha)))};
    out.append(reinterpret_cast<const char*>(values.data()), sizeof(values));
  }
  return out;
}

}  // namespace fte
