#include "cbfsim/robot_dynamics.hpp"

#include <cmath>

#include "cbfsim/errors.hpp"

namespace cbfsim {

Dynamics::Dynamics(const RobotModel& model) : model_(model) {
  model_.validate();
  const std::size_t n = static_cast<std::size_t>(model_.n_joints);
  rot_.resize(n + 1);
  org_.resize(n + 1);
  omega_.resize(n + 1);
  alpha_.resize(n + 1);
  acc_origin_.resize(n + 1);
  acc_com_.resize(n);
  force_.resize(n);
  com_world_.resize(n);
  probe_.resize(model_.n_joints);
}

void Dynamics::update_frames(const Eigen::VectorXd& q) {
  const int n = model_.n_joints;
  rot_[0].setIdentity();
  org_[0].setZero();
  for (int i = 0; i < n; ++i) {
    const LinkSpec& link = model_.links[static_cast<std::size_t>(i)];
    const double ct = std::cos(q[i] + link.theta_offset);
    const double st = std::sin(q[i] + link.theta_offset);
    const double ca = std::cos(link.alpha);
    const double sa = std::sin(link.alpha);
    // Standard (distal) DH: Rz(theta) Tz(d) Tx(a) Rx(alpha).
    Eigen::Matrix3d r_local;
    r_local << ct, -st * ca, st * sa,
               st, ct * ca, -ct * sa,
               0.0, sa, ca;
    const Eigen::Vector3d p_local(link.a * ct, link.a * st, link.d);
    org_[static_cast<std::size_t>(i) + 1] = org_[static_cast<std::size_t>(i)] +
                                            rot_[static_cast<std::size_t>(i)] * p_local;
    rot_[static_cast<std::size_t>(i) + 1] = rot_[static_cast<std::size_t>(i)] * r_local;
  }
}

Eigen::Vector3d Dynamics::forward_kinematics(const Eigen::VectorXd& q) {
  check_joint_vector(q, model_.n_joints, "q");
  update_frames(q);
  return org_[static_cast<std::size_t>(model_.n_joints)];
}

Eigen::MatrixXd Dynamics::jacobian(const Eigen::VectorXd& q) {
  check_joint_vector(q, model_.n_joints, "q");
  update_frames(q);
  const int n = model_.n_joints;
  const Eigen::Vector3d& ee = org_[static_cast<std::size_t>(n)];
  Eigen::MatrixXd jac(3, n);
  for (int i = 0; i < n; ++i) {
    // Geometric column for a revolute joint: z_{i-1} x (p_ee - o_{i-1}).
    const Eigen::Vector3d z = rot_[static_cast<std::size_t>(i)].col(2);
    jac.col(i) = z.cross(ee - org_[static_cast<std::size_t>(i)]);
  }
  return jac;
}

void Dynamics::newton_euler(const Eigen::VectorXd& dq, const Eigen::VectorXd& qdd,
                            const Eigen::Vector3d& base_accel, bool include_friction,
                            Eigen::VectorXd& tau_out) {
  const int n = model_.n_joints;
  omega_[0].setZero();
  alpha_[0].setZero();
  acc_origin_[0] = base_accel;

  // Outward pass: link velocities and accelerations in world frame.
  for (int i = 0; i < n; ++i) {
    const std::size_t k = static_cast<std::size_t>(i);
    const Eigen::Vector3d z = rot_[k].col(2);  // joint i axis
    omega_[k + 1] = omega_[k] + dq[i] * z;
    alpha_[k + 1] = alpha_[k] + qdd[i] * z + omega_[k].cross(dq[i] * z);
    const Eigen::Vector3d r = org_[k + 1] - org_[k];
    acc_origin_[k + 1] =
        acc_origin_[k] + alpha_[k + 1].cross(r) + omega_[k + 1].cross(omega_[k + 1].cross(r));
    const LinkSpec& link = model_.links[k];
    com_world_[k] = org_[k + 1] + rot_[k + 1] * link.com;
    const Eigen::Vector3d rc = com_world_[k] - org_[k];
    acc_com_[k] =
        acc_origin_[k] + alpha_[k + 1].cross(rc) + omega_[k + 1].cross(omega_[k + 1].cross(rc));
    force_[k] = link.mass * acc_com_[k];
  }

  // Inward pass: joint forces/moments, projected on the joint axes.
  Eigen::Vector3d f_child = Eigen::Vector3d::Zero();
  Eigen::Vector3d n_child = Eigen::Vector3d::Zero();
  for (int i = n - 1; i >= 0; --i) {
    const std::size_t k = static_cast<std::size_t>(i);
    const LinkSpec& link = model_.links[k];
    const Eigen::Matrix3d inertia_w =
        rot_[k + 1] * link.inertia * rot_[k + 1].transpose();
    const Eigen::Vector3d moment_com =
        inertia_w * alpha_[k + 1] + omega_[k + 1].cross(inertia_w * omega_[k + 1]);
    const Eigen::Vector3d f_joint = f_child + force_[k];
    const Eigen::Vector3d n_joint = moment_com + n_child -
                                    (org_[k] - com_world_[k]).cross(f_joint) +
                                    (org_[k + 1] - com_world_[k]).cross(f_child);
    tau_out[i] = rot_[k].col(2).dot(n_joint);
    if (include_friction) tau_out[i] += model_.friction[i] * dq[i];
    f_child = f_joint;
    n_child = n_joint;
  }
}

Eigen::Vector3d Dynamics::jdot_qdot(const JointState& state) {
  check_joint_vector(state.q, model_.n_joints, "q");
  check_joint_vector(state.dq, model_.n_joints, "dq");
  update_frames(state.q);
  const int n = model_.n_joints;
  omega_[0].setZero();
  alpha_[0].setZero();
  acc_origin_[0].setZero();
  // Kinematic outward pass with qdd = 0 and no gravity: the end-effector
  // origin acceleration is exactly Jdot * dq.
  for (int i = 0; i < n; ++i) {
    const std::size_t k = static_cast<std::size_t>(i);
    const Eigen::Vector3d z = rot_[k].col(2);
    omega_[k + 1] = omega_[k] + state.dq[i] * z;
    alpha_[k + 1] = alpha_[k] + omega_[k].cross(state.dq[i] * z);
    const Eigen::Vector3d r = org_[k + 1] - org_[k];
    acc_origin_[k + 1] =
        acc_origin_[k] + alpha_[k + 1].cross(r) + omega_[k + 1].cross(omega_[k + 1].cross(r));
  }
  return acc_origin_[static_cast<std::size_t>(n)];
}

Eigen::MatrixXd Dynamics::mass_matrix(const Eigen::VectorXd& q) {
  check_joint_vector(q, model_.n_joints, "q");
  Eigen::MatrixXd m(model_.n_joints, model_.n_joints);
  mass_matrix_into(q, m);
  return m;
}

void Dynamics::mass_matrix_into(const Eigen::VectorXd& q, Eigen::MatrixXd& m_out) {
  const int n = model_.n_joints;
  m_out.resize(n, n);
  update_frames(q);
  const Eigen::VectorXd dq_zero = Eigen::VectorXd::Zero(n);
  Eigen::VectorXd qdd = Eigen::VectorXd::Zero(n);
  for (int j = 0; j < n; ++j) {
    qdd[j] = 1.0;
    newton_euler(dq_zero, qdd, Eigen::Vector3d::Zero(), false, probe_);
    m_out.col(j) = probe_;
    qdd[j] = 0.0;
  }
  // Columns are probed independently; enforce exact symmetry.
  m_out = 0.5 * (m_out + m_out.transpose()).eval();
}

Eigen::VectorXd Dynamics::bias_forces(const JointState& state) {
  check_joint_vector(state.q, model_.n_joints, "q");
  check_joint_vector(state.dq, model_.n_joints, "dq");
  Eigen::VectorXd tau(model_.n_joints);
  bias_forces_into(state.q, state.dq, tau);
  return tau;
}

void Dynamics::bias_forces_into(const Eigen::VectorXd& q, const Eigen::VectorXd& dq,
                                Eigen::VectorXd& tau_out) {
  tau_out.resize(model_.n_joints);
  update_frames(q);
  const Eigen::VectorXd qdd_zero = Eigen::VectorXd::Zero(model_.n_joints);
  newton_euler(dq, qdd_zero, -model_.gravity, true, tau_out);
}

Eigen::VectorXd Dynamics::gravity_torque(const Eigen::VectorXd& q) {
  check_joint_vector(q, model_.n_joints, "q");
  update_frames(q);
  const Eigen::VectorXd zero = Eigen::VectorXd::Zero(model_.n_joints);
  Eigen::VectorXd tau(model_.n_joints);
  newton_euler(zero, zero, -model_.gravity, false, tau);
  return tau;
}

Eigen::VectorXd Dynamics::inverse_dynamics(const JointState& state, const Eigen::VectorXd& qdd) {
  check_joint_vector(state.q, model_.n_joints, "q");
  check_joint_vector(state.dq, model_.n_joints, "dq");
  check_joint_vector(qdd, model_.n_joints, "qdd");
  update_frames(state.q);
  Eigen::VectorXd tau(model_.n_joints);
  newton_euler(state.dq, qdd, -model_.gravity, true, tau);
  return tau;
}

}  // namespace cbfsim
