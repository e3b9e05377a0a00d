#pragma once

#include "fte/geometry.hpp"
#include "fte/trajectory.hpp"

#include <Eigen/Core>

#include <array>
#include <cstddef>
#include <functional>
#include <string>
#include <string_view>
#include <vector>

namespace fte {

/// Phase dynamics tau * ds/dt = -alpha_s * s with s(0) = 1.
struct CanonicalSystem {
  double alpha_s = 4.0;
  double tau = 1.0;  // seconds

  /// Closed form exp(-alpha_s * t / tau).
  double phase(double t) const;

  /// Factor applied to the phase each integration step. The update is the exact
  /// discrete solution, so the integrated phase equals the closed form at every step.
  double step_factor(double dt) const;
};

double canonical_phase(const CanonicalSystem& cs, double t);

/// Normalized radial-basis forcing term with one weight column per output dimension:
///   f_d(s) = (sum_i w_id psi_i(s) / sum_i psi_i(s)) * s * scale_d,
///   psi_i(s) = exp(-h_i (s - c_i)^2).
struct ForcingTerm {
  std::vector<double> centers;  // strictly decreasing in (0, 1]
  std::vector<double> widths;   // > 0
  Eigen::MatrixXd weights;      // n_basis x 3

  /// Centers exp(-alpha_s * i / (n - 1)) (uniform in time), widths
  /// 1 / (2 (c_{i+1} - c_i)^2) with the last width repeated; zero weights.
  static ForcingTerm with_basis(std::size_t n_basis, double alpha_s);

  std::size_t size() const noexcept { return centers.size(); }

  /// psi_i(s) / sum_j psi_j(s), computed without underflow.
  Eigen::VectorXd normalized_basis(double s) const;

  Vec3 evaluate(double s, const Vec3& scale) const;
};

/// Per-dimension amplitude rule. When |g - y0| < kDegenerateAmplitude the goal
/// offset cannot scale the forcing term; the channel then uses a fixed scale
/// (max of |g - y0| and the demonstrated range, or 1 for a constant channel)
/// at fit time and at every rollout.
inline constexpr double kDegenerateAmplitude = 1e-6;

struct ChannelScaling {
  std::array<bool, 3> degenerate{false, false, false};
  Vec3 fixed_scale = Vec3::Ones();

  /// Scale used for the given goal offset (g - y0).
  Vec3 scale_for(const Vec3& goal_offset) const;
};

struct DmpParams {
  double alpha_z = 25.0;  // beta_z = alpha_z / 4 (critical damping)
  double alpha_s = 4.0;
  std::size_t n_basis = 30;
  double ridge_lambda = 1e-6;
};

/// Fitted primitive for one segment: position per axis and the orientation as a
/// 3-d rotation-vector channel relative to the segment start.
struct DmpModel {
  CanonicalSystem canonical;
  double alpha_z = 25.0;
  double beta_z = 25.0 / 4.0;
  ForcingTerm position_forcing;
  ForcingTerm orientation_forcing;
  ChannelScaling position_scaling;
  ChannelScaling orientation_scaling;
  Pose start;
  Pose goal;
  Vec3 rotation_goal = Vec3::Zero();  // unwrapped rotation vector of start^-1 * goal
  double duration = 1.0;              // seconds (== canonical.tau)
};

/// Fits one DMP to a segment. tau is the segment duration; velocities and
/// accelerations come from three-point finite differences with exact
/// non-uniform weights; weights solve the ridge problem per dimension.
///
/// Throws FitError with fewer than max(10, n_basis) samples, or when
/// ridge_lambda == 0 and the normal equations are rank deficient.
DmpModel fit_dmp(const Trajectory& segment, const DmpParams& params = {});

/// Integration state handed to a coupling hook before each velocity update.
struct CouplingState {
  std::size_t step;  // 0-based index of the step being taken
  double phase;
  double tau;
  double dt;
  const Vec3& position;
  const Vec3& velocity;  // tau-scaled velocity v = tau * dy/dt
};

/// Extra acceleration added to the position channel: tau dv/dt = a_dmp + a_coupling.
using CouplingHook = std::function<Vec3(const CouplingState&)>;

struct RolloutOptions {
  double dt = 0.02;              // seconds; must satisfy 0 < dt <= tau / 50
  double horizon_factor = 1.25;  // steps = ceil(horizon_factor * tau / dt)
  CouplingHook coupling;         // empty: plain DMP
};

struct RolloutResult {
  Trajectory trajectory;            // samples at t = n * dt, one segment
  std::vector<Vec3> velocities;     // tau-scaled, one per sample
  std::vector<double> phases;       // one per sample
};

/// Integrates the model from new_start towards new_goal (semi-implicit Euler on the
/// tau-scaled system; phase first, then velocity, then position). The forcing
/// weights are never modified. Throws RolloutError naming the step if the state
/// becomes non-finite and std::invalid_argument if dt is out of range.
RolloutResult rollout_states(const DmpModel& model, const Pose& new_start, const Pose& new_goal,
                             const RolloutOptions& options);

Trajectory rollout(const DmpModel& model, const Pose& new_start, const Pose& new_goal,
                   const RolloutOptions& options);

std::size_t rollout_steps(const DmpModel& model, const RolloutOptions& options);

/// First derivatives of y(t) by three-point differences on a non-uniform grid.
std::vector<double> finite_difference_first(std::span<const double> t, std::span<const double> y);
std::vector<double> finite_difference_second(std::span<const double> t, std::span<const double> y);

std::string dmp_model_to_json(const DmpModel& model);
DmpModel parse_dmp_model_json(std::string_view text);

/// 64-bit FNV-1a of the model JSON, as 16 hex digits.
std::string dmp_model_hash(const DmpModel& model);

}  // namespace fte
