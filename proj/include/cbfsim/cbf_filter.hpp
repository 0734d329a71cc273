#pragma once

#include <Eigen/Dense>
#include <string>

#include "cbfsim/qp_solver.hpp"
#include "cbfsim/robot_dynamics.hpp"

namespace cbfsim {

struct Obstacle {
  Eigen::Vector3d center = Eigen::Vector3d::Zero();
  double radius = 0.1;  // m, > 0

  void validate() const;
};

/// End-effector clearance sphere plus extra safety padding. The effective
/// keep-out radius around an obstacle is r_o + r_ee + r_pad.
struct ClearanceSpec {
  double r_ee = 0.0;
  double r_pad = 0.0;

  void validate() const;
  double margin(const Obstacle& obstacle) const {
    return obstacle.radius + r_ee + r_pad;
  }
};

/// Gains of the second-order barrier constraint
///   d2h + kappa2 * dh + kappa1 * h >= 0.
struct CbfParams {
  double kappa1 = 1.0;
  double kappa2 = 1.0;

  void validate() const;  // strictly positive
};

/// Per-step filter telemetry appended to the trajectory log.
struct CbfDiagnostics {
  double h = 0.0;    // m^2
  double lfh = 0.0;  // d/dt of h along the drift
  Eigen::RowVectorXd a_row;  // 1 x n constraint row on tau_qp
  double b = 0.0;            // constraint right-hand side
  Eigen::VectorXd tau_qp;
  bool active = false;       // any nonzero filter torque
};

/// Squared-distance safety function: ||ee - center||^2 - r_m^2.
/// Non-negative exactly when the clearance sphere avoids the obstacle.
double safety_h(const Eigen::Vector3d& ee_pos, const Obstacle& obstacle,
                const ClearanceSpec& clearance);

/// First derivative of h along the motion: 2 (ee - center) . ee_vel.
double lie_derivative_1(const Eigen::Vector3d& ee_pos, const Eigen::Vector3d& ee_vel,
                        const Obstacle& obstacle);

/// The assembled inequality a_row * tau_qp <= b together with the scalar
/// intermediates used to build it.
struct CbfConstraint {
  Eigen::RowVectorXd a_row;  // s_row * J * M^{-1}
  double b = 0.0;
  double h = 0.0;
  double lfh = 0.0;
  double d2h_nominal = 0.0;  // second derivative of h under tau_nom alone
};

/// Builds the barrier inequality from the current state and nominal torque:
///   a_row = s J M^{-1},  s = 2 (ee - center)'
///   b = [2 |ee_vel|^2 + s (Jdot dq) + a_row (tau_nom - bias)]
///       + kappa2 * dh + kappa1 * h
CbfConstraint assemble_constraint(Dynamics& dyn, const JointState& state,
                                  const Eigen::VectorXd& tau_nom, const Obstacle& obstacle,
                                  const ClearanceSpec& clearance, const CbfParams& params);

struct FilterResult {
  Eigen::VectorXd tau_safe;
  CbfDiagnostics diag;
  std::string fault;  // empty on success; "qp_infeasible" / "qp_iteration_limit"

  bool ok() const { return fault.empty(); }
};

/// Minimal-norm torque correction: solves min 1/2 |tau_qp|^2 subject to the
/// barrier inequality, with the last three joints pinned to zero correction
/// when wrist_lock is set (requires n >= 4). Returns tau_nom - tau_qp.
FilterResult filter(Dynamics& dyn, const JointState& state, const Eigen::VectorXd& tau_nom,
                    const Obstacle& obstacle, const ClearanceSpec& clearance,
                    const CbfParams& params, bool wrist_lock);

}  // namespace cbfsim
