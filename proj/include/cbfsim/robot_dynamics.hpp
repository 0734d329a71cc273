#pragma once

#include <Eigen/Dense>
#include <vector>

#include "cbfsim/robot_model.hpp"

namespace cbfsim {

/// Forward kinematics and rigid-body dynamics for a serial revolute arm.
///
/// All quantities follow the manipulator equation
///   M(q) qdd + c(q,dq) + D dq + g(q) = tau
/// where c is the velocity-product (Coriolis/centripetal) torque, D the
/// viscous friction matrix and g the gravity torque. Only the combined
/// bias c + D dq + g is ever materialized.
///
/// Every operation is a deterministic function of its inputs; the class
/// only holds preallocated scratch buffers, so give each simulation
/// worker its own instance.
class Dynamics {
public:
  explicit Dynamics(const RobotModel& model);

  const RobotModel& model() const { return model_; }
  int n() const { return model_.n_joints; }

  /// World-frame position of the end-effector frame origin.
  Eigen::Vector3d forward_kinematics(const Eigen::VectorXd& q);

  /// 3xn linear-velocity Jacobian: ee_vel = J(q) * dq.
  Eigen::MatrixXd jacobian(const Eigen::VectorXd& q);

  /// End-effector linear acceleration with qdd = 0, i.e. the Jdot*dq term,
  /// from an exact forward velocity/acceleration pass.
  Eigen::Vector3d jdot_qdot(const JointState& state);

  /// Symmetric positive-definite joint-space inertia matrix, assembled
  /// from n gravity-free inverse-dynamics column probes.
  Eigen::MatrixXd mass_matrix(const Eigen::VectorXd& q);

  /// Combined non-inertial torque c(q,dq) + D dq + g(q), so that
  /// tau = M(q) qdd + bias_forces(q,dq).
  Eigen::VectorXd bias_forces(const JointState& state);

  /// Gravity torque alone (zero-velocity, friction-free bias).
  Eigen::VectorXd gravity_torque(const Eigen::VectorXd& q);

  /// Recursive Newton-Euler: joint torque realizing qdd at the given state.
  Eigen::VectorXd inverse_dynamics(const JointState& state, const Eigen::VectorXd& qdd);

  /// In-place variants for the simulation hot path (no shape checks).
  void mass_matrix_into(const Eigen::VectorXd& q, Eigen::MatrixXd& m_out);
  void bias_forces_into(const Eigen::VectorXd& q, const Eigen::VectorXd& dq,
                        Eigen::VectorXd& tau_out);

private:
  // Frame poses for q; fills rot_/org_ (frame 0..n; index i+1 = link i frame).
  void update_frames(const Eigen::VectorXd& q);

  // Newton-Euler with an arbitrary base acceleration (gravity trick) and
  // optional friction. Assumes update_frames(q) was called.
  void newton_euler(const Eigen::VectorXd& dq, const Eigen::VectorXd& qdd,
                    const Eigen::Vector3d& base_accel, bool include_friction,
                    Eigen::VectorXd& tau_out);

  const RobotModel& model_;

  // Scratch: world rotation and origin per frame, joint axes, and the
  // velocity/acceleration recursion state.
  std::vector<Eigen::Matrix3d> rot_;
  std::vector<Eigen::Vector3d> org_;
  std::vector<Eigen::Vector3d> omega_, alpha_, acc_origin_;
  std::vector<Eigen::Vector3d> acc_com_, force_, com_world_;
  Eigen::VectorXd probe_;
};

}  // namespace cbfsim
