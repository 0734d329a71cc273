#pragma once

#include <Eigen/Dense>

#include "cbfsim/robot_dynamics.hpp"
#include "cbfsim/trajectory.hpp"

namespace cbfsim {

/// Proportional/derivative gains of the computed-torque controller.
struct CtcGains {
  double kp = 100.0;
  double kd = 20.0;

  void validate() const;  // both strictly positive
};

/// Computed-torque control: cancels the full manipulator dynamics and
/// imposes the linear error dynamics  e_dd = -kd e_d - kp e.
///   tau = bias(q,dq) + M(q) (ddq_d - kd (dq - dq_d) - kp (q - q_d))
Eigen::VectorXd ctc_torque(Dynamics& dyn, const JointState& state,
                           const TrajectorySample& sample, const CtcGains& gains);

}  // namespace cbfsim
