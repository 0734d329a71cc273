#pragma once

#include <Eigen/Dense>

namespace cbfsim {

/// Joint-space sweep: one joint follows a quintic polynomial between two
/// angles while the remaining joints hold a fixed home posture.
struct TrajectorySpec {
  int sweep_joint = 0;
  double theta_start = 0.0;  // rad
  double theta_end = 0.0;    // rad
  double duration = 1.0;     // s
  Eigen::VectorXd home_posture;  // rad, one entry per joint

  void validate(int n_joints) const;  // throws ConfigError
};

struct TrajectorySample {
  Eigen::VectorXd q_d;
  Eigen::VectorXd dq_d;
  Eigen::VectorXd ddq_d;
};

/// Desired state at time t. The quintic time scaling has zero boundary
/// velocity and acceleration; t outside [0, duration] clamps to the
/// nearest endpoint state.
TrajectorySample sample_trajectory(const TrajectorySpec& spec, double t);

}  // namespace cbfsim
