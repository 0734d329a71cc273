#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <Eigen/Dense>
#include <random>

#include "cbfsim/qp_solver.hpp"
#include "support/qp_oracle.hpp"
#include "support/test_models.hpp"

using namespace cbfsim;
using namespace testsupport;

// random_matrix / random_feasible_qp live in support/qp_oracle.hpp, shared
// with the acceptance gate.

TEST_CASE("unconstrained minimizer solves H x = -f") {
  std::mt19937 rng(3);
  for (int trial = 0; trial < 50; ++trial) {
    const QpProblem p = random_feasible_qp(rng, 2 + trial % 5, 0, 0);
    const QpSolution sol = solve_qp(p);
    REQUIRE(sol.status == QpStatus::optimal);
    const Eigen::VectorXd expected = p.H.ldlt().solve(-p.f);
    CHECK((sol.x - expected).cwiseAbs().maxCoeff() <= 1e-9);
  }
}

TEST_CASE("single-inequality projection has the closed-form answer") {
  // min 1/2 |x|^2 s.t. a.x <= b with b < 0 projects the origin onto the
  // half-space boundary: x* = a b / |a|^2.
  std::mt19937 rng(5);
  for (int trial = 0; trial < 50; ++trial) {
    const Eigen::Index n = 2 + trial % 5;
    QpProblem p;
    p.H = Eigen::MatrixXd::Identity(n, n);
    p.f = Eigen::VectorXd::Zero(n);
    p.a_ineq = random_matrix(rng, 1, n, -2.0, 2.0);
    if (p.a_ineq.norm() < 0.1) continue;
    p.b_ineq = Eigen::VectorXd::Constant(1, uniform(rng, -3.0, -0.1));

    const QpSolution sol = solve_qp(p);
    REQUIRE(sol.status == QpStatus::optimal);
    const Eigen::VectorXd expected =
        p.a_ineq.transpose() * (p.b_ineq[0] / p.a_ineq.row(0).squaredNorm());
    CHECK((sol.x - expected).cwiseAbs().maxCoeff() <= 1e-9);
    CHECK(kkt_residuals(p, sol).max() <= 1e-8);
  }
}

TEST_CASE("1000 random feasible QPs match the enumeration oracle") {
  std::mt19937 rng(1234);
  int checked = 0;
  while (checked < 1000) {
    const Eigen::Index n = 2 + static_cast<Eigen::Index>(rng() % 5);        // 2..6
    const Eigen::Index n_ineq = static_cast<Eigen::Index>(rng() % 7);       // 0..6
    const Eigen::Index n_eq =
        std::min<Eigen::Index>(static_cast<Eigen::Index>(rng() % 3), n - 1);  // 0..2

    const QpProblem p = random_feasible_qp(rng, n, n_ineq, n_eq);
    const QpOracleResult oracle = enumerate_qp(p);
    REQUIRE(oracle.feasible);  // constructed feasible by anchoring at x0

    const QpSolution sol = solve_qp(p);
    REQUIRE(sol.status == QpStatus::optimal);
    CHECK(std::abs(sol.objective - oracle.objective) <= 1e-6 * std::max(1.0, std::abs(oracle.objective)));
    CHECK((sol.x - oracle.x).cwiseAbs().maxCoeff() <= 1e-6);
    CHECK(kkt_residuals(p, sol).max() <= 1e-8);
    ++checked;
  }
}

TEST_CASE("contradictory half-spaces are reported infeasible") {
  QpProblem p;
  p.H = Eigen::MatrixXd::Identity(2, 2);
  p.f = Eigen::VectorXd::Zero(2);
  p.a_ineq.resize(2, 2);
  p.a_ineq << 1.0, 0.0, -1.0, 0.0;  // x0 <= -1 and x0 >= 0
  p.b_ineq.resize(2);
  p.b_ineq << -1.0, 0.0;

  const QpSolution sol = solve_qp(p);
  CHECK(sol.status == QpStatus::infeasible);
}

TEST_CASE("equality row conflicting with an inequality is infeasible") {
  QpProblem p;
  p.H = Eigen::MatrixXd::Identity(2, 2);
  p.f = Eigen::VectorXd::Zero(2);
  p.a_eq.resize(1, 2);
  p.a_eq << 1.0, 1.0;
  p.b_eq = Eigen::VectorXd::Constant(1, 2.0);
  p.a_ineq.resize(1, 2);
  p.a_ineq << 1.0, 1.0;
  p.b_ineq = Eigen::VectorXd::Constant(1, 1.0);  // x0+x1 <= 1 but must equal 2

  const QpSolution sol = solve_qp(p);
  CHECK(sol.status == QpStatus::infeasible);
}

TEST_CASE("duplicate constraint rows do not break the active-set loop") {
  std::mt19937 rng(77);
  for (int trial = 0; trial < 100; ++trial) {
    QpProblem p = random_feasible_qp(rng, 3, 3, 0);
    // Duplicate the first inequality verbatim and append a scaled copy.
    const Eigen::Index m = p.a_ineq.rows();
    p.a_ineq.conservativeResize(m + 2, Eigen::NoChange);
    p.b_ineq.conservativeResize(m + 2);
    p.a_ineq.row(m) = p.a_ineq.row(0);
    p.b_ineq[m] = p.b_ineq[0];
    p.a_ineq.row(m + 1) = 2.0 * p.a_ineq.row(0);
    p.b_ineq[m + 1] = 2.0 * p.b_ineq[0];

    const QpSolution sol = solve_qp(p);
    REQUIRE(sol.status == QpStatus::optimal);
    const QpOracleResult oracle = enumerate_qp(p);
    REQUIRE(oracle.feasible);
    CHECK(std::abs(sol.objective - oracle.objective) <= 1e-6 * std::max(1.0, std::abs(oracle.objective)));
    CHECK(kkt_residuals(p, sol).max() <= 1e-8);
  }
}

TEST_CASE("equality-constrained QP matches the KKT closed form") {
  std::mt19937 rng(99);
  for (int trial = 0; trial < 50; ++trial) {
    const Eigen::Index n = 3 + static_cast<Eigen::Index>(rng() % 3);
    const QpProblem p = random_feasible_qp(rng, n, 0, 2);

    Eigen::MatrixXd kkt(n + 2, n + 2);
    kkt.setZero();
    kkt.topLeftCorner(n, n) = p.H;
    kkt.topRightCorner(n, 2) = p.a_eq.transpose();
    kkt.bottomLeftCorner(2, n) = p.a_eq;
    Eigen::VectorXd rhs(n + 2);
    rhs.head(n) = -p.f;
    rhs.tail(2) = p.b_eq;
    const Eigen::VectorXd xstar = kkt.fullPivLu().solve(rhs).head(n);

    const QpSolution sol = solve_qp(p);
    REQUIRE(sol.status == QpStatus::optimal);
    CHECK((sol.x - xstar).cwiseAbs().maxCoeff() <= 1e-8);
  }
}

TEST_CASE("multipliers of active inequalities are non-negative") {
  std::mt19937 rng(111);
  for (int trial = 0; trial < 200; ++trial) {
    const QpProblem p = random_feasible_qp(rng, 3, 4, 1);
    const QpSolution sol = solve_qp(p);
    REQUIRE(sol.status == QpStatus::optimal);
    if (sol.mult_ineq.size() > 0) CHECK(sol.mult_ineq.minCoeff() >= -1e-10);
  }
}
