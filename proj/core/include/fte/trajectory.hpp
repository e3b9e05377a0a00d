#pragma once

#include "fte/geometry.hpp"

#include <cstddef>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace fte {

struct Sample {
  double time = 0.0;  // seconds
  Pose pose;
  double gripper = 0.0;  // [0, 1]
};

/// Timestamped end-effector poses partitioned into segments by split indices.
///
/// Invariants (checked on construction, FormatError otherwise):
///   - times finite and strictly increasing, gripper in [0, 1], positions finite;
///   - splits strictly increasing, first == 0, last == size() - 1;
///   - every segment holds at least two samples.
/// A default-constructed trajectory is empty and has no splits.
class Trajectory {
 public:
  Trajectory() = default;
  Trajectory(std::vector<Sample> samples, std::vector<std::size_t> splits);

  /// One segment spanning all samples.
  static Trajectory single_segment(std::vector<Sample> samples);

  const std::vector<Sample>& samples() const noexcept { return samples_; }
  const std::vector<std::size_t>& splits() const noexcept { return splits_; }
  const Sample& operator[](std::size_t i) const { return samples_[i]; }
  std::size_t size() const noexcept { return samples_.size(); }
  bool empty() const noexcept { return samples_.empty(); }

  std::size_t segment_count() const noexcept { return splits_.empty() ? 0 : splits_.size() - 1; }

  /// Samples splits[k] .. splits[k+1] inclusive, as a single-segment trajectory.
  Trajectory segment(std::size_t k) const;

  double duration() const;
  std::vector<Vec3> positions() const;
  std::vector<UnitQuaternion> orientations() const;
  double arc_length() const;

 private:
  std::vector<Sample> samples_;
  std::vector<std::size_t> splits_;
};

// Text formats. CSV columns: t,x,y,z,qw,qx,qy,qz,gripper,split (header required).
// JSON: an array of objects with the same keys, or {"samples": [...]}.
Trajectory parse_trajectory_csv(std::string_view text);
Trajectory parse_trajectory_json(std::string_view text);
std::string trajectory_to_csv(const Trajectory& trajectory);

/// Chooses the parser from the extension (.json, anything else is CSV).
Trajectory read_trajectory(const std::filesystem::path& path);
void write_trajectory_csv(const Trajectory& trajectory, const std::filesystem::path& path);

}  // namespace fte
