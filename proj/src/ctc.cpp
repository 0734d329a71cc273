#include "cbfsim/ctc.hpp"

#include "cbfsim/errors.hpp"

namespace cbfsim {

void CtcGains::validate() const {
  if (!(kp > 0.0) || !(kd > 0.0)) {
    throw ConfigError("controller gains kp and kd must be strictly positive");
  }
}

Eigen::VectorXd ctc_torque(Dynamics& dyn, const JointState& state,
                           const TrajectorySample& sample, const CtcGains& gains) {
  const int n = dyn.n();
  check_joint_vector(sample.q_d, n, "q_d");
  check_joint_vector(sample.dq_d, n, "dq_d");
  check_joint_vector(sample.ddq_d, n, "ddq_d");
  const Eigen::VectorXd ref =
      sample.ddq_d - gains.kd * (state.dq - sample.dq_d) - gains.kp * (state.q - sample.q_d);
  return dyn.bias_forces(state) + dyn.mass_matrix(state.q) * ref;
}

}  // namespace cbfsim
