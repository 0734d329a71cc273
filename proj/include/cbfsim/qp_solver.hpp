#pragma once

#include <Eigen/Dense>
#include <vector>

namespace cbfsim {

/// Small dense convex QP:
///   min  1/2 x' H x + f' x
///   s.t. a_ineq x <= b_ineq,  a_eq x = b_eq
/// H must be symmetric positive definite for solve_qp.
struct QpProblem {
  Eigen::MatrixXd H;
  Eigen::VectorXd f;
  Eigen::MatrixXd a_ineq;  // p x n (may be 0 x n)
  Eigen::VectorXd b_ineq;
  Eigen::MatrixXd a_eq;    // r x n, full row rank, r <= n
  Eigen::VectorXd b_eq;
};

enum class QpStatus { optimal, infeasible, iteration_limit };

struct QpSolution {
  Eigen::VectorXd x;
  std::vector<int> active_set;   // inequality indices active at the solution
  double objective = 0.0;
  QpStatus status = QpStatus::iteration_limit;
  Eigen::VectorXd mult_ineq;     // lambda >= 0, one per inequality
  Eigen::VectorXd mult_eq;       // nu, one per equality
};

/// KKT residuals of a candidate solution: primal feasibility (inequality
/// and equality), stationarity, and complementary slackness. All four are
/// infinity norms; a certified optimum has every entry <= tol.
struct KktResiduals {
  double primal_ineq = 0.0;
  double primal_eq = 0.0;
  double stationarity = 0.0;
  double complementarity = 0.0;

  double max() const;
};

KktResiduals kkt_residuals(const QpProblem& problem, const QpSolution& solution);

/// Dual active-set solve (Goldfarb-Idnani scheme): starts at the
/// unconstrained minimizer, activates violated constraints one at a time
/// with primal/dual step-length control, and certifies infeasibility when a
/// violated constraint admits no compatible multiplier adjustment. Needs no
/// feasible starting point. `max_iter` bounds constraint activations.
QpSolution solve_qp(const QpProblem& problem, double tol = 1e-8, int max_iter = 50);

}  // namespace cbfsim
