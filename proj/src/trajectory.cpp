#include "cbfsim/trajectory.hpp"

#include <algorithm>
#include <string>

#include "cbfsim/errors.hpp"

namespace cbfsim {

void TrajectorySpec::validate(int n_joints) const {
  if (!(duration > 0.0)) throw ConfigError("trajectory duration must be > 0");
  if (sweep_joint < 0 || sweep_joint >= n_joints) {
    throw ConfigError("sweep_joint " + std::to_string(sweep_joint) +
                      " out of range for " + std::to_string(n_joints) + " joints");
  }
  if (home_posture.size() != n_joints) {
    throw ConfigError("home_posture must have one entry per joint");
  }
  if (!home_posture.allFinite()) throw ConfigError("home_posture must be finite");
}

TrajectorySample sample_trajectory(const TrajectorySpec& spec, double t) {
  const auto n = spec.home_posture.size();
  TrajectorySample s;
  s.q_d = spec.home_posture;
  s.dq_d = Eigen::VectorXd::Zero(n);
  s.ddq_d = Eigen::VectorXd::Zero(n);

  const double u = std::clamp(t / spec.duration, 0.0, 1.0);
  const double u2 = u * u;
  const double u3 = u2 * u;
  const double shape = u3 * (10.0 - 15.0 * u + 6.0 * u2);
  const double dshape = 30.0 * u2 * (1.0 - u) * (1.0 - u);
  const double ddshape = 60.0 * u * (1.0 - 3.0 * u + 2.0 * u2);

  const double span = spec.theta_end - spec.theta_start;
  const double inv_t = 1.0 / spec.duration;
  s.q_d[spec.sweep_joint] = spec.theta_start + span * shape;
  s.dq_d[spec.sweep_joint] = span * dshape * inv_t;
  s.ddq_d[spec.sweep_joint] = span * ddshape * inv_t * inv_t;
  return s;
}

}  // namespace cbfsim
