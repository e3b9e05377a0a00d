#pragma once

#include "fte/dmp.hpp"
#include "fte/geometry.hpp"
#include "fte/metrics.hpp"
#include "fte/obstacle.hpp"
#include "fte/scene.hpp"
#include "fte/trajectory.hpp"

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace fte {

/// Truncated-normal perturbation of one boundary pose.
struct BoundaryDistribution {
  Vec3 translation_std = Vec3::Zero();    // meters, per axis
  Vec3 translation_bound = Vec3::Zero();  // meters, |dp_i| <= bound_i
  double rotation_std = 0.0;              // radians, isotropic on the rotation vector
  double rotation_bound = 0.0;            // radians, |delta| <= bound
};

/// Boundaries are indexed like the split list: boundary k is the pose at splits[k].
struct PerturbationSpec {
  BoundaryDistribution distribution;                        // used unless overridden
  std::map<std::size_t, BoundaryDistribution> overrides;    // per boundary
  std::vector<bool> perturbable;  // per boundary; empty: every boundary except the first
  std::uint64_t seed = 0;

  const BoundaryDistribution& distribution_for(std::size_t boundary) const;
  bool is_perturbable(std::size_t boundary) const;

  /// Throws std::invalid_argument on negative or non-finite stds or bounds.
  void validate() const;
};

struct BoundaryPerturbation {
  std::size_t boundary = 0;
  Vec3 dp = Vec3::Zero();
  UnitQuaternion dq;
};

/// Draws (dp, dq) for one boundary of one rollout. The random stream is derived
/// from (seed, rollout_index, boundary) only, so the draw does not depend on
/// evaluation order. A zero std or zero bound gives a zero component.
BoundaryPerturbation sample_boundary_perturbation(const PerturbationSpec& spec,
                                                  std::size_t boundary,
                                                  std::size_t rollout_index);

/// Perturbed pose: position + dp, orientation * dq (body frame).
Pose perturb_pose(const Pose& pose, const BoundaryPerturbation& perturbation);

struct SynthesisJob {
  Trajectory demo;
  std::shared_ptr<const GaussianScene> scene;  // may be null when obstacles are off
  PerturbationSpec perturbation;
  ObstacleParams obstacle;
  bool obstacle_enabled = true;
  DmpParams dmp;
  std::size_t n_demos = 1;
  double dt = 0.02;
  double horizon_factor = 1.25;
  unsigned threads = 0;  // 0: hardware concurrency
  /// Threshold for the per-rollout collision flag; unset: obstacle.rho_th.
  /// A value above obstacle.rho_th gives the coupling a safety margin.
  std::optional<double> collision_rho_th;

  double evaluation_threshold() const { return collision_rho_th.value_or(obstacle.rho_th); }
  void validate() const;
};

enum class RolloutStatus { kOk, kFailed };

struct RolloutRecord {
  std::size_t index = 0;
  RolloutStatus status = RolloutStatus::kOk;
  std::string error;                               // set when failed
  std::vector<BoundaryPerturbation> perturbations;  // one per perturbable boundary
  std::vector<Pose> segment_goals;                  // perturbed goal per segment
  Trajectory trajectory;                            // empty when failed
  EvalReport report;                                // against the expert, when ok
};

struct SynthesisResult {
  std::vector<DmpModel> models;  // one per segment, fit once on the expert
  std::vector<std::string> model_hashes;
  std::vector<RolloutRecord> rollouts;

  std::size_t failed_count() const;
};

/// Fits every segment once, then for each rollout samples the boundary
/// perturbations and rolls the segments out in order. Segment k + 1 starts at
/// the pose segment k actually reached; the junction sample is emitted once.
/// The gripper channel is the demo's, held piecewise constant and stretched
/// over the rollout. A rollout error marks that rollout failed and the batch
/// continues. Output is identical for any thread count.
SynthesisResult synthesize(const SynthesisJob& job);

std::string rollout_file_name(std::size_t index);

std::string manifest_json(const SynthesisJob& job, const SynthesisResult& result);

/// rollout_NNNN.csv per successful rollout, manifest.json, summary.csv.
/// Throws ExportError when the directory cannot be created or written.
void export_dataset(const SynthesisJob& job, const SynthesisResult& result,
                    const std::filesystem::path& directory);

}  // namespace fte
