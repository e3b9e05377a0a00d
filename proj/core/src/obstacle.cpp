#include "fte/obstacle.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace fte {
namespace {

Vec3 unit_or_zero(const Vec3& v, double epsilon) {
  const double n = v.norm();
  return n > epsilon ? Vec3(v / n) : Vec3::Zero();
}

}  // namespace

void ObstacleParams::validate() const {
  const auto require = [](bool ok, const char* key) {
    if (!ok) {
      throw std::invalid_argument(std::string("obstacle.") + key + " out of range");
    }
  };
  require(rho_th > 0.0, "rho_th");
  require(lambda_max >= 0.0, "lambda_max");
  require(gamma >= 0.0, "gamma");
  require(epsilon > 0.0, "epsilon");
  require(lookahead >= 0.0, "lookahead");
  require(return_gain >= 0.0, "return_gain");
  require(return_cap >= 0.0, "return_cap");
  require(gradient_step > 0.0, "gradient_step");
}

Vec3 outward_normal(const GaussianScene& scene, const Vec3& x, double epsilon, double h) {
  const Vec3 grad = density_gradient(scene, x, h);
  return -grad / (grad.norm() + epsilon);
}

Vec3 tangential_direction(const Vec3& n_hat, const Vec3& v, double epsilon) {
  const Vec3 v_hat = unit_or_zero(v, epsilon);
  const Vec3 t = n_hat - n_hat.dot(v_hat) * v_hat;
  return t / (t.norm() + epsilon);
}

Vec3 obstacle_accel(const GaussianScene& scene, const Vec3& x, const Vec3& v,
                    const ObstacleParams& params) {
  const Vec3 v_hat = unit_or_zero(v, params.epsilon);
  const double rho_look = scene.density(x + params.lookahead * v_hat);
  if (rho_look <= params.rho_th) {
    return Vec3::Zero();
  }
  const Vec3 n_hat = outward_normal(scene, x, params.epsilon, params.gradient_step);
  const double sigma_rho = std::clamp((rho_look - params.rho_th) / params.rho_th, 0.0, 1.0);
  const double sigma_dir = std::clamp(-v_hat.dot(n_hat), 0.0, 1.0);
  const double gain = params.lambda_max * sigma_rho * sigma_dir;
  return gain * (n_hat + params.gamma * tangential_direction(n_hat, v, params.epsilon));
}

Vec3 return_to_reference(const Vec3& x, const Vec3& v, const Vec3& x_ref, const Vec3& v_ref,
                         double rho_local, const ObstacleParams& params) {
  const double w = std::clamp(1.0 - rho_local / params.rho_th, 0.0, 1.0);
  if (w == 0.0) {
    return Vec3::Zero();
  }
  Vec3 a = w * params.return_gain * (x_ref - x) -
           2.0 * std::sqrt(params.return_gain) * w * (v - v_ref);
  const double norm = a.norm();
  if (norm > params.return_cap) {
    a *= params.return_cap / norm;
  }
  return a;
}

ObstacleCoupling::ObstacleCoupling(const GaussianScene& scene, const ObstacleParams& params,
                                   std::span<const Vec3> reference_positions,
                                   std::span<const Vec3> reference_velocities)
    : scene_(&scene),
      params_(params),
      reference_positions_(reference_positions),
      reference_velocities_(reference_velocities) {}

Vec3 ObstacleCoupling::operator()(const CouplingState& state) const {
  ObstacleParams step_params = params_;
  const double speed = state.velocity.norm() / state.tau;
  step_params.lookahead = std::max(params_.lookahead, 3.0 * state.dt * speed);
  Vec3 a = obstacle_accel(*scene_, state.position, state.velocity, step_params);

  if (params_.return_gain > 0.0 && state.step < reference_positions_.size()) {
    const double rho_local = scene_->density(state.position);
    a += return_to_reference(state.position, state.velocity, reference_positions_[state.step],
                             reference_velocities_[state.step], rho_local, params_);
  }
  return a;
}

RolloutResult coupled_rollout(const DmpModel& model, const Pose& start, const Pose& goal,
                              const GaussianScene& scene, const ObstacleParams& params,
                              const RolloutOptions& options) {
  RolloutOptions plain = options;
  plain.coupling = nullptr;
  const RolloutResult nominal = rollout_states(model, start, goal, plain);
  const std::vector<Vec3> positions = nominal.trajectory.positions();

  RolloutOptions coupled = options;
  coupled.coupling = ObstacleCoupling(scene, params, positions, nominal.velocities);
  return rollout_states(model, start, goal, coupled);
}

}  // namespace fte
