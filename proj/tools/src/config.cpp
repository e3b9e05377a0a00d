#include "config.hpp"

#include <fte/text_io.hpp>

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace fte::cli {
namespace {

using nlohmann::json;

const std::vector<KeySpec> kKeys = {
    {"demo", "path", "null", "expert trajectory (.csv or .json)"},
    {"scene", "path", "null", "splat scene (.ply or .json)"},
    {"scene", "opacity_floor", "0.05", "blobs below this opacity are dropped"},
    {"scene", "ply_activation", "\"logistic\"", "\"logistic\" (pre-activation PLY) or \"raw\""},
    {"scene", "cutoff_sigmas", "7", "blob support radius in standard deviations"},
    {"scene", "transform", "null", "4x4 transform JSON applied to the scene at load"},
    {"perturbation", "seed", "0", "master seed"},
    {"perturbation", "translation_std", "[0,0,0]", "per-axis std of boundary translation (m)"},
    {"perturbation", "translation_bound", "[0,0,0]", "per-axis bound of boundary translation (m)"},
    {"perturbation", "rotation_std", "0", "std of the boundary rotation vector (rad)"},
    {"perturbation", "rotation_bound", "0", "bound on the boundary rotation angle (rad)"},
    {"perturbation", "perturbable", "null", "bool per boundary; null: all but the first"},
    {"perturbation", "overrides", "{}", "per-boundary distribution, keyed by boundary index"},
    {"obstacle", "enabled", "true", "couple rollouts to the scene density"},
    {"obstacle", "rho_th", "0.3", "density threshold"},
    {"obstacle", "lambda_max", "400", "peak repulsive gain"},
    {"obstacle", "gamma", "1", "tangential bias"},
    {"obstacle", "epsilon", "1e-08", "normalizer guard"},
    {"obstacle", "lookahead", "0.02", "minimum density probe distance (m)"},
    {"obstacle", "return_gain", "25", "return-to-reference stiffness"},
    {"obstacle", "return_cap", "50", "bound on the return correction"},
    {"obstacle", "gradient_step", "0.001", "central-difference step (m)"},
    {"dmp", "alpha_z", "25", "transformation gain; beta_z = alpha_z / 4"},
    {"dmp", "alpha_s", "4", "canonical decay rate"},
    {"dmp", "n_basis", "30", "basis functions per channel"},
    {"dmp", "ridge_lambda", "1e-06", "ridge regularization"},
    {"rollout", "n_demos", "1", "rollouts to synthesize"},
    {"rollout", "dt", "0.02", "integration step (s)"},
    {"rollout", "horizon_factor", "1.25", "rollout length in segment durations"},
    {"rollout", "threads", "0", "worker threads; 0: all cores"},
    {"output", "dir", "\"fte_out\"", "dataset directory"},
    {"metrics", "rho_th", "null", "collision threshold; null: obstacle.rho_th"},
    {"metrics", "writing_error", "false", "compute the writing error"},
    {"metrics", "resolution", "128", "raster canvas size (px)"},
    {"metrics", "stroke_px", "3", "raster stroke width (px)"},
    {"metrics", "plane_point", "[0,0,0]", "writing plane point"},
    {"metrics", "plane_normal", "[0,0,1]", "writing plane normal"},
};

const std::vector<std::string_view> kDistributionKeys = {"translation_std", "translation_bound",
                                                         "rotation_std", "rotation_bound"};

[[noreturn]] void fail(const std::string& name, const std::string& what) {
  throw UsageError(name + ": " + what);
}

double number(const json& v, const std::string& name) {
  if (!v.is_number()) {
    fail(name, "expected a number");
  }
  const double x = v.get<double>();
  if (!std::isfinite(x)) {
    fail(name, "must be finite");
  }
  return x;
}

double positive(const json& v, const std::string& name) {
  const double x = number(v, name);
  if (!(x > 0.0)) {
    fail(name, "must be > 0");
  }
  return x;
}

double non_negative(const json& v, const std::string& name) {
  const double x = number(v, name);
  if (x < 0.0) {
    fail(name, "must be >= 0");
  }
  return x;
}

std::uint64_t unsigned_integer(const json& v, const std::string& name) {
  if (!v.is_number_unsigned()) {
    fail(name, "expected a non-negative integer");
  }
  return v.get<std::uint64_t>();
}

bool boolean(const json& v, const std::string& name) {
  if (!v.is_boolean()) {
    fail(name, "expected true or false");
  }
  return v.get<bool>();
}

Vec3 vec3(const json& v, const std::string& name) {
  if (!v.is_array() || v.size() != 3) {
    fail(name, "expected an array of 3 numbers");
  }
  return {number(v[0], name), number(v[1], name), number(v[2], name)};
}

Vec3 non_negative_vec3(const json& v, const std::string& name) {
  const Vec3 x = vec3(v, name);
  if ((x.array() < 0.0).any()) {
    fail(name, "components must be >= 0");
  }
  return x;
}

std::filesystem::path path(const json& v, const std::string& name,
                           const std::filesystem::path& base_dir) {
  if (v.is_null()) {
    return {};
  }
  if (!v.is_string() || v.get<std::string>().empty()) {
    fail(name, "expected a path string or null");
  }
  std::filesystem::path p = v.get<std::string>();
  return p.is_absolute() || base_dir.empty() ? p : base_dir / p;
}

BoundaryDistribution distribution(const json& section, const std::string& prefix,
                                  BoundaryDistribution d) {
  for (const auto& [key, value] : section.items()) {
    const std::string name = prefix + key;
    if (key == "translation_std") {
      d.translation_std = non_negative_vec3(value, name);
    } else if (key == "translation_bound") {
      d.translation_bound = non_negative_vec3(value, name);
    } else if (key == "rotation_std") {
      d.rotation_std = non_negative(value, name);
    } else if (key == "rotation_bound") {
      d.rotation_bound = non_negative(value, name);
    }
  }
  return d;
}

json defaults() {
  json doc = json::object();
  for (const auto& k : kKeys) {
    doc[std::string(k.section)][std::string(k.key)] = json::parse(k.default_text);
  }
  return doc;
}

}  // namespace

const std::vector<KeySpec>& config_keys() { return kKeys; }

std::string config_help() {
  std::ostringstream out;
  out << "Config keys (JSON sections; defaults in brackets):\n";
  for (const auto& k : kKeys) {
    std::string name = std::string(k.section) + "." + std::string(k.key);
    name.resize(std::max<std::size_t>(name.size() + 1, 32), ' ');
    out << "  " << name << "[" << k.default_text << "] " << k.help << "\n";
  }
  return out.str();
}

RunConfig parse_run_config(std::string_view text, const std::filesystem::path& base_dir) {
  json user;
  try {
    user = json::parse(text);
  } catch (const json::parse_error& e) {
    throw UsageError(std::string("config: invalid JSON: ") + e.what());
  }
  if (!user.is_object()) {
    throw UsageError("config: top level must be an object");
  }
  json doc = defaults();
  for (const auto& [section, body] : user.items()) {
    if (!doc.contains(section)) {
      fail(section, "unknown section");
    }
    if (!body.is_object()) {
      fail(section, "expected an object");
    }
    for (const auto& [key, value] : body.items()) {
      if (!doc[section].contains(key)) {
        fail(section + "." + key, "unknown key");
      }
      doc[section][key] = value;
    }
  }

  RunConfig c;
  c.demo_path = path(doc["demo"]["path"], "demo.path", base_dir);

  const json& scene = doc["scene"];
  c.scene_path = path(scene["path"], "scene.path", base_dir);
  c.scene_transform = path(scene["transform"], "scene.transform", base_dir);
  c.scene_options.opacity_floor = non_negative(scene["opacity_floor"], "scene.opacity_floor");
  c.scene_options.cutoff_sigmas = positive(scene["cutoff_sigmas"], "scene.cutoff_sigmas");
  const json& activation = scene["ply_activation"];
  if (activation == "logistic") {
    c.scene_options.activation = PlyActivation::kPreActivation;
  } else if (activation == "raw") {
    c.scene_options.activation = PlyActivation::kActivated;
  } else {
    fail("scene.ply_activation", "expected \"logistic\" or \"raw\"");
  }

  const json& pert = doc["perturbation"];
  c.perturbation.seed = unsigned_integer(pert["seed"], "perturbation.seed");
  c.perturbation.distribution = distribution(pert, "perturbation.", {});
  if (!pert["perturbable"].is_null()) {
    if (!pert["perturbable"].is_array()) {
      fail("perturbation.perturbable", "expected an array of booleans or null");
    }
    for (const auto& flag : pert["perturbable"]) {
      c.perturbation.perturbable.push_back(boolean(flag, "perturbation.perturbable"));
    }
  }
  if (!pert["overrides"].is_object()) {
    fail("perturbation.overrides", "expected an object keyed by boundary index");
  }
  for (const auto& [boundary, body] : pert["overrides"].items()) {
    const std::string prefix = "perturbation.overrides." + boundary;
    std::size_t index = 0;
    try {
      std::size_t used = 0;
      index = std::stoul(boundary, &used);
      if (used != boundary.size()) {
        throw std::invalid_argument(boundary);
      }
    } catch (const std::exception&) {
      fail(prefix, "key must be a boundary index");
    }
    if (!body.is_object()) {
      fail(prefix, "expected an object");
    }
    for (const auto& [key, value] : body.items()) {
      if (std::find(kDistributionKeys.begin(), kDistributionKeys.end(), key) ==
          kDistributionKeys.end()) {
        fail(prefix + "." + key, "unknown key");
      }
    }
    c.perturbation.overrides[index] =
        distribution(body, prefix + ".", c.perturbation.distribution);
  }

  const json& obs = doc["obstacle"];
  c.obstacle_enabled = boolean(obs["enabled"], "obstacle.enabled");
  c.obstacle.rho_th = positive(obs["rho_th"], "obstacle.rho_th");
  c.obstacle.lambda_max = non_negative(obs["lambda_max"], "obstacle.lambda_max");
  c.obstacle.gamma = non_negative(obs["gamma"], "obstacle.gamma");
  c.obstacle.epsilon = positive(obs["epsilon"], "obstacle.epsilon");
  c.obstacle.lookahead = non_negative(obs["lookahead"], "obstacle.lookahead");
  c.obstacle.return_gain = non_negative(obs["return_gain"], "obstacle.return_gain");
  c.obstacle.return_cap = non_negative(obs["return_cap"], "obstacle.return_cap");
  c.obstacle.gradient_step = positive(obs["gradient_step"], "obstacle.gradient_step");

  const json& dmp = doc["dmp"];
  c.dmp.alpha_z = positive(dmp["alpha_z"], "dmp.alpha_z");
  c.dmp.alpha_s = positive(dmp["alpha_s"], "dmp.alpha_s");
  c.dmp.n_basis = unsigned_integer(dmp["n_basis"], "dmp.n_basis");
  c.dmp.ridge_lambda = non_negative(dmp["ridge_lambda"], "dmp.ridge_lambda");

  const json& roll = doc["rollout"];
  c.n_demos = unsigned_integer(roll["n_demos"], "rollout.n_demos");
  c.dt = positive(roll["dt"], "rollout.dt");
  c.horizon_factor = positive(roll["horizon_factor"], "rollout.horizon_factor");
  c.threads = static_cast<unsigned>(unsigned_integer(roll["threads"], "rollout.threads"));

  c.output_dir = path(doc["output"]["dir"], "output.dir", base_dir);

  const json& met = doc["metrics"];
  if (!met["rho_th"].is_null()) {
    c.collision_rho_th = positive(met["rho_th"], "metrics.rho_th");
  }
  c.writing_error = boolean(met["writing_error"], "metrics.writing_error");
  c.raster.resolution = static_cast<int>(unsigned_integer(met["resolution"], "metrics.resolution"));
  c.raster.stroke_px = static_cast<int>(unsigned_integer(met["stroke_px"], "metrics.stroke_px"));
  c.raster.plane.point = vec3(met["plane_point"], "metrics.plane_point");
  c.raster.plane.normal = vec3(met["plane_normal"], "metrics.plane_normal");

  validate_run_config(c);
  return c;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  if (!std::filesystem::is_regular_file(path)) {
    throw UsageError("config file not found: " + path.string());
  }
  return parse_run_config(read_text_file(path), path.parent_path());
}

RunConfig default_run_config() { return parse_run_config("{}"); }

void validate_run_config(const RunConfig& c) {
  if (c.n_demos < 1) {
    fail("rollout.n_demos", "must be >= 1");
  }
  if (!(c.dt > 0.0)) {
    fail("rollout.dt", "must be > 0");
  }
  if (!(c.horizon_factor >= 1.0)) {
    fail("rollout.horizon_factor", "must be >= 1");
  }
  if (c.dmp.n_basis < 2) {
    fail("dmp.n_basis", "must be >= 2");
  }
  if (c.raster.resolution < 8) {
    fail("metrics.resolution", "must be >= 8");
  }
  if (c.raster.stroke_px < 1 || c.raster.stroke_px * 4 > c.raster.resolution) {
    fail("metrics.stroke_px", "must be in [1, resolution / 4]");
  }
  if (c.raster.plane.normal.norm() < 1e-12) {
    fail("metrics.plane_normal", "must be non-zero");
  }
  if (c.output_dir.empty()) {
    fail("output.dir", "must be set");
  }
}

}  // namespace fte::cli
