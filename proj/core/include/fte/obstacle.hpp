#pragma once

#include "fte/dmp.hpp"
#include "fte/geometry.hpp"
#include "fte/scene.hpp"

#include <span>
#include <vector>

namespace fte {

struct ObstacleParams {
  double rho_th = 0.3;        // density threshold
  double lambda_max = 400.0;  // peak repulsive gain (tau-scaled acceleration units)
  double gamma = 1.0;         // tangential bias
  double epsilon = 1e-8;      // normalizer guard
  double lookahead = 0.02;    // meters; the coupling uses max(lookahead, 3 dt |dy/dt|)
  double return_gain = 25.0;  // stiffness of the return-to-reference pull
  double return_cap = 50.0;   // bound on the return correction magnitude
  double gradient_step = kDefaultGradientStep;

  /// Throws std::invalid_argument when a field is out of range.
  void validate() const;
};

/// -grad rho / (|grad rho| + eps): points away from mass, norm <= 1, ~0 where the
/// gradient vanishes.
Vec3 outward_normal(const GaussianScene& scene, const Vec3& x, double epsilon,
                    double h = kDefaultGradientStep);

/// Component of n_hat orthogonal to the motion direction, normalized with the eps
/// guard. Zero when v is (near) zero or parallel to n_hat.
Vec3 tangential_direction(const Vec3& n_hat, const Vec3& v, double epsilon);

/// lambda(rho, v.n) (n_hat + gamma t_hat). The density gate is evaluated at
/// x + lookahead * v_hat:
///   sigma_rho = clamp((rho_look - rho_th) / rho_th, 0, 1)
///   sigma_dir = clamp(-v_hat . n_hat, 0, 1)
///   lambda    = lambda_max * sigma_rho * sigma_dir
/// Exactly zero when rho_look <= rho_th.
Vec3 obstacle_accel(const GaussianScene& scene, const Vec3& x, const Vec3& v,
                    const ObstacleParams& params);

/// w k (x_ref - x) - 2 sqrt(k) w (v - v_ref), clamped to return_cap, with
/// w = clamp(1 - rho_local / rho_th, 0, 1).
Vec3 return_to_reference(const Vec3& x, const Vec3& v, const Vec3& x_ref, const Vec3& v_ref,
                         double rho_local, const ObstacleParams& params);

/// Coupling hook for rollout(): obstacle repulsion plus the pull back to a nominal
/// (uncoupled) rollout indexed by step. Holds references; the scene and the
/// reference must outlive the hook.
class ObstacleCoupling {
 public:
  ObstacleCoupling(const GaussianScene& scene, const ObstacleParams& params,
                   std::span<const Vec3> reference_positions,
                   std::span<const Vec3> reference_velocities);

  Vec3 operator()(const CouplingState& state) const;

 private:
  const GaussianScene* scene_;
  ObstacleParams params_;
  std::span<const Vec3> reference_positions_;
  std::span<const Vec3> reference_velocities_;
};

/// Nominal rollout followed by the coupled rollout that tracks it.
RolloutResult coupled_rollout(const DmpModel& model, const Pose& start, const Pose& goal,
                              const GaussianScene& scene, const ObstacleParams& params,
                              const RolloutOptions& options);

}  // namespace fte
