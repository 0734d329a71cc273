#include "cbfsim/cbf_filter.hpp"

#include "cbfsim/errors.hpp"

namespace cbfsim {

void Obstacle::validate() const {
  if (!(radius > 0.0)) throw ConfigError("obstacle radius must be > 0");
  if (!center.allFinite()) throw ConfigError("obstacle center must be finite");
}

void ClearanceSpec::validate() const {
  if (!(r_ee >= 0.0) || !(r_pad >= 0.0)) {
    throw ConfigError("clearance radii must be >= 0");
  }
}

void CbfParams::validate() const {
  if (!(kappa1 > 0.0) || !(kappa2 > 0.0)) {
    throw ConfigError("CBF gains kappa1 and kappa2 must be strictly positive");
  }
}

double safety_h(const Eigen::Vector3d& ee_pos, const Obstacle& obstacle,
                const ClearanceSpec& clearance) {
  const double r_m = clearance.margin(obstacle);
  return (ee_pos - obstacle.center).squaredNorm() - r_m * r_m;
}

double lie_derivative_1(const Eigen::Vector3d& ee_pos, const Eigen::Vector3d& ee_vel,
                        const Obstacle& obstacle) {
  return 2.0 * (ee_pos - obstacle.center).dot(ee_vel);
}

CbfConstraint assemble_constraint(Dynamics& dyn, const JointState& state,
                                  const Eigen::VectorXd& tau_nom, const Obstacle& obstacle,
                                  const ClearanceSpec& clearance, const CbfParams& params) {
  const int n = dyn.n();
  check_joint_vector(tau_nom, n, "tau_nom");

  const Eigen::Vector3d ee = dyn.forward_kinematics(state.q);
  const Eigen::MatrixXd jac = dyn.jacobian(state.q);
  const Eigen::Vector3d ee_vel = jac * state.dq;
  const Eigen::Vector3d sep = ee - obstacle.center;
  const Eigen::RowVector3d s_row = 2.0 * sep.transpose();

  CbfConstraint c;
  c.h = safety_h(ee, obstacle, clearance);
  c.lfh = 2.0 * sep.dot(ee_vel);

  const Eigen::MatrixXd mass = dyn.mass_matrix(state.q);
  const Eigen::VectorXd bias = dyn.bias_forces(state);
  // a_row' = M^{-1} (s J)' since M is symmetric.
  c.a_row = mass.ldlt().solve((s_row * jac).transpose()).transpose();
  const Eigen::Vector3d jdqd = dyn.jdot_qdot(state);
  c.d2h_nominal = 2.0 * ee_vel.squaredNorm() + s_row * jdqd + c.a_row.dot(tau_nom - bias);
  c.b = c.d2h_nominal + params.kappa2 * c.lfh + params.kappa1 * c.h;
  return c;
}

FilterResult filter(Dynamics& dyn, const JointState& state, const Eigen::VectorXd& tau_nom,
                    const Obstacle& obstacle, const ClearanceSpec& clearance,
                    const CbfParams& params, bool wrist_lock) {
  const int n = dyn.n();
  if (wrist_lock && n < 4) {
    throw PreconditionError("wrist_lock requires at least 4 joints");
  }

  const CbfConstraint c = assemble_constraint(dyn, state, tau_nom, obstacle, clearance, params);

  FilterResult result;
  result.diag.h = c.h;
  result.diag.lfh = c.lfh;
  result.diag.a_row = c.a_row;
  result.diag.b = c.b;

  if (c.b >= 0.0) {
    // Zero correction is feasible and is the unconstrained minimizer.
    result.diag.tau_qp = Eigen::VectorXd::Zero(n);
    result.diag.active = false;
    result.tau_safe = tau_nom;
    return result;
  }

  // With wrist_lock the three joints closest to the end effector receive no
  // filter torque (the nominal controller still actuates them). Eliminating
  // those variables keeps their corrections exactly zero and shrinks the QP.
  const int n_free = wrist_lock ? n - 3 : n;
  QpProblem qp;
  qp.H = Eigen::MatrixXd::Identity(n_free, n_free);
  qp.f = Eigen::VectorXd::Zero(n_free);
  qp.a_ineq = c.a_row.head(n_free);
  qp.b_ineq = Eigen::VectorXd::Constant(1, c.b);
  qp.a_eq = Eigen::MatrixXd::Zero(0, n_free);
  qp.b_eq = Eigen::VectorXd::Zero(0);

  const QpSolution qs = solve_qp(qp);
  if (qs.status != QpStatus::optimal) {
    result.fault =
        (qs.status == QpStatus::infeasible) ? "qp_infeasible" : "qp_iteration_limit";
    result.diag.tau_qp = Eigen::VectorXd::Zero(n);
    result.diag.active = false;
    result.tau_safe = tau_nom;
    return result;
  }

  result.diag.tau_qp = Eigen::VectorXd::Zero(n);
  result.diag.tau_qp.head(n_free) = qs.x;
  result.diag.active = qs.x.lpNorm<Eigen::Infinity>() > 1e-12;
  result.tau_safe = tau_nom - result.diag.tau_qp;
  return result;
}

}  // namespace cbfsim
