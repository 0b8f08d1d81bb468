#pragma once

// Discrete-time simulation of a learned pose policy.

#include <algorithm>
#include <cmath>
#include <string>
#include <string_view>
#include <vector>

#include "se3ds/ds_model.hpp"
#include "se3ds/errors.hpp"
#include "se3ds/manifold.hpp"

namespace se3ds {

struct Perturbation {
  int step = 0;
  Vec3 delta_p = Vec3::Zero();
  UnitQuaternion delta_q;  ///< applied on the right: q <- q * delta_q
};

struct RolloutConfig {
  double dt = 0.01;
  int max_steps = 5000;
  double convergence_tol_pos = 1e-2;
  double convergence_tol_ori = 1e-2;
  std::vector<Perturbation> perturbations;
};

struct Pose {
  Vec3 p = Vec3::Zero();
  UnitQuaternion q;
};

struct StepResult {
  Vec3 velocity = Vec3::Zero();
  AngularVelocity angular_velocity;
  Vec3 p_next = Vec3::Zero();
  UnitQuaternion q_next;
  UnitQuaternion q_desired;
  Eigen::VectorXd gamma;
  double V = 0.0;
  double dV = 0.0;
};

/// One policy step from (p, q). Orientation: predicted attractor-tangent
/// step, transported to q, exp-mapped, converted to a body angular velocity
/// and integrated exactly. Position: explicit Euler.
[[nodiscard]] inline StepResult step(const Se3Policy& policy, const Vec3& p,
                                     const UnitQuaternion& q, double dt) {
  if (!(dt > 0.0)) throw ValidationError("dt must be positive");
  StepResult r;
  const OrientationStep o = next_orientation(policy, p, q);
  r.q_desired = o.desired;
  r.angular_velocity = displacement_to_angular_velocity(q, o.desired, dt);
  r.q_next = q * angular_velocity_to_increment(r.angular_velocity, dt);
  r.velocity = predict_position_velocity(policy, p, q);
  r.p_next = p + dt * r.velocity;
  r.gamma = policy.mixture.mixing_function(p, q);
  r.V = lyapunov_value(policy, q);
  r.dV = lyapunov_value(policy, r.q_next) - r.V;
  return r;
}

enum class RolloutStatus { kConverged, kMaxSteps, kError };

[[nodiscard]] inline std::string_view to_string(RolloutStatus s) {
  switch (s) {
    case RolloutStatus::kConverged: return "converged";
    case RolloutStatus::kMaxSteps: return "max_steps";
    case RolloutStatus::kError: return "error";
  }
  return "";
}

struct TraceRow {
  double t = 0.0;
  Vec3 p = Vec3::Zero();
  UnitQuaternion q;
  Vec3 velocity = Vec3::Zero();
  AngularVelocity angular_velocity;
  Eigen::VectorXd gamma;
  double V = 0.0;
  double dV = 0.0;
};

struct RolloutTrace {
  std::vector<TraceRow> rows;
  RolloutStatus status = RolloutStatus::kMaxSteps;
  std::string error;
  /// Steps taken before the terminal state (the last row is that state).
  int steps = 0;
};

inline void validate_config(const RolloutConfig& config) {
  if (!(config.dt > 0.0)) throw ValidationError("rollout dt must be positive");
  if (config.max_steps < 0) throw ValidationError("max_steps must be >= 0");
  if (!(config.convergence_tol_pos > 0.0) ||
      !(config.convergence_tol_ori > 0.0)) {
    throw ValidationError("convergence tolerances must be positive");
  }
  for (const auto& pert : config.perturbations) {
    if (pert.step < 0 || pert.step >= config.max_steps) {
      throw ValidationError("perturbation step " + std::to_string(pert.step) +
                            " outside [0, max_steps)");
    }
  }
}

/// Iterates step() from `start`. Row i holds the state at t = i dt (after
/// any perturbation scheduled for step i) with the policy outputs there.
/// Convergence is only declared once every perturbation has been applied.
[[nodiscard]] inline RolloutTrace run(const Se3Policy& policy, const Pose& start,
                                      const RolloutConfig& config) {
  validate_config(config);
  RolloutTrace trace;
  Vec3 p = start.p;
  UnitQuaternion q = align_hemisphere(start.q, policy.attractor_ori);
  int last_perturbation = -1;
  for (const auto& pert : config.perturbations) {
    last_perturbation = std::max(last_perturbation, pert.step);
  }

  trace.rows.reserve(static_cast<std::size_t>(config.max_steps) + 1);
  try {
    for (int s = 0; s <= config.max_steps; ++s) {
      for (const auto& pert : config.perturbations) {
        if (pert.step != s) continue;
        p += pert.delta_p;
        q = align_hemisphere(q * pert.delta_q, policy.attractor_ori);
      }
      const StepResult r = step(policy, p, q, config.dt);
      TraceRow row;
      row.t = s * config.dt;
      row.p = p;
      row.q = q;
      row.velocity = r.velocity;
      row.angular_velocity = r.angular_velocity;
      row.gamma = r.gamma;
      row.V = r.V;
      row.dV = r.dV;
      trace.rows.push_back(std::move(row));
      trace.steps = s;

      const bool at_rest =
          (p - policy.attractor_pos).norm() < config.convergence_tol_pos &&
          rotation_distance(q, policy.attractor_ori) <
              config.convergence_tol_ori;
      if (s >= last_perturbation && at_rest) {
        trace.status = RolloutStatus::kConverged;
        return trace;
      }
      if (s == config.max_steps) break;
      p = r.p_next;
      q = align_hemisphere(r.q_next, policy.attractor_ori);
    }
  } catch (const Error& e) {
    trace.status = RolloutStatus::kError;
    trace.error = e.what();
    return trace;
  }
  trace.status = RolloutStatus::kMaxSteps;
  return trace;
}

/// Index of the largest mixing weight.
[[nodiscard]] inline int argmax_component(const Eigen::VectorXd& gamma) {
  Eigen::Index best = 0;
  gamma.maxCoeff(&best);
  return static_cast<int>(best);
}

}  // namespace se3ds
