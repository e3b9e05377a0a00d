#pragma once

#include "fte/scene.hpp"

#include <filesystem>
#include <string>
#include <string_view>

namespace fte {

/// How a 3DGS PLY stores scales and opacity.
enum class PlyActivation {
  kPreActivation,  // log-scales and logit opacities (what 3DGS training writes)
  kActivated,      // scales and opacities stored directly
};

struct SceneLoadOptions {
  double opacity_floor = kDefaultOpacityFloor;
  PlyActivation activation = PlyActivation::kPreActivation;
  double cutoff_sigmas = kDefaultCutoffSigmas;
};

/// Loads a 3DGS PLY (ascii or binary_little_endian; vertex fields x,y,z,
/// scale_0..2, rot_0..3 (w first), opacity) or a native JSON scene
/// {"blobs":[{"mu":[3],"cov":[[3],[3],[3]],"alpha":a}, ...]}, chosen by extension.
///
/// Covariances are rebuilt as R diag(s^2) R^T. Blobs whose covariance or opacity
/// is invalid are skipped and counted in GaussianScene::rejected_count(); missing
/// fields throw FormatError.
GaussianScene load_scene(const std::filesystem::path& path, const SceneLoadOptions& options = {});

GaussianScene parse_scene_json(std::string_view text, const SceneLoadOptions& options = {});
GaussianScene parse_scene_ply(std::string_view bytes, const SceneLoadOptions& options = {});

std::string scene_to_json(const GaussianScene& scene);

/// Binary little-endian 3DGS-style PLY in the pre-activation convention.
std::string scene_to_ply(const GaussianScene& scene);

}  // namespace fte
