#include "cbfsim/qp_solver.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "cbfsim/errors.hpp"

namespace cbfsim {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Relative threshold deciding when a projected direction is numerically
// zero, i.e. when a constraint normal lies in the span of the active ones.
constexpr double kDependenceTol = 1e-12;

void check_problem(const QpProblem& p) {
  const auto n = p.H.rows();
  if (p.H.cols() != n || n == 0) throw ConfigError("QP: H must be square and non-empty");
  if (p.f.size() != n) throw ConfigError("QP: f length must match H");
  if (p.a_ineq.rows() != p.b_ineq.size()) throw ConfigError("QP: a_ineq/b_ineq mismatch");
  if (p.a_eq.rows() != p.b_eq.size()) throw ConfigError("QP: a_eq/b_eq mismatch");
  if (p.a_ineq.rows() > 0 && p.a_ineq.cols() != n) throw ConfigError("QP: a_ineq width");
  if (p.a_eq.rows() > 0 && p.a_eq.cols() != n) throw ConfigError("QP: a_eq width");
  if (p.a_eq.rows() > n) throw ConfigError("QP: more equalities than variables");
  const double h_scale = std::max(1.0, p.H.cwiseAbs().maxCoeff());
  if ((p.H - p.H.transpose()).cwiseAbs().maxCoeff() > 1e-10 * h_scale) {
    throw ConfigError("QP: H must be symmetric");
  }
  if (Eigen::LLT<Eigen::MatrixXd>(p.H).info() != Eigen::Success) {
    throw ConfigError("QP: H must be positive definite");
  }
}

// Every constraint as  normal . x >= rhs  with normal = -row'. Rows
// 0..n_eq-1 are the equalities (slack pinned to zero), the rest the
// inequalities (slack non-negative when satisfied).
struct ConstraintView {
  Eigen::MatrixXd normals;  // n x (n_eq + n_ineq), one column per row
  Eigen::VectorXd rhs;
  Eigen::Index n_eq = 0;

  double slack(Eigen::Index row, const Eigen::VectorXd& x) const {
    return normals.col(row).dot(x) - rhs[row];
  }
};

// Saddle solve
//   [H N; N' 0] [z; rv] = [n_p; 0]
// z is the primal direction x moves along while the multiplier of p grows
// by one unit, rv the rate at which the active multipliers shrink. N must
// have full column rank (the solver maintains that invariant).
void directions(const Eigen::LLT<Eigen::MatrixXd>& h_llt, const Eigen::MatrixXd& h,
                const ConstraintView& view, const std::vector<Eigen::Index>& active,
                Eigen::Index p, Eigen::VectorXd& z, Eigen::VectorXd& rv) {
  const Eigen::Index n = h.rows();
  const Eigen::Index q = static_cast<Eigen::Index>(active.size());
  if (q == 0) {
    z = h_llt.solve(view.normals.col(p));
    rv.resize(0);
    return;
  }
  Eigen::MatrixXd kkt = Eigen::MatrixXd::Zero(n + q, n + q);
  kkt.topLeftCorner(n, n) = h;
  for (Eigen::Index k = 0; k < q; ++k) {
    kkt.block(0, n + k, n, 1) = view.normals.col(active[static_cast<std::size_t>(k)]);
    kkt.block(n + k, 0, 1, n) =
        view.normals.col(active[static_cast<std::size_t>(k)]).transpose();
  }
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(n + q);
  rhs.head(n) = view.normals.col(p);
  const Eigen::VectorXd sol = kkt.fullPivLu().solve(rhs);
  z = sol.head(n);
  rv = sol.tail(q);
}

QpSolution failed(QpStatus status, Eigen::Index n, Eigen::Index n_ineq, Eigen::Index n_eq) {
  QpSolution sol;
  sol.status = status;
  sol.x = Eigen::VectorXd::Zero(n);
  sol.mult_ineq = Eigen::VectorXd::Zero(n_ineq);
  sol.mult_eq = Eigen::VectorXd::Zero(n_eq);
  return sol;
}

}  // namespace

double KktResiduals::max() const {
  return std::max({primal_ineq, primal_eq, stationarity, complementarity});
}

KktResiduals kkt_residuals(const QpProblem& p, const QpSolution& s) {
  KktResiduals r;
  if (p.a_ineq.rows() > 0) {
    r.primal_ineq = (p.a_ineq * s.x - p.b_ineq).cwiseMax(0.0).lpNorm<Eigen::Infinity>();
    r.complementarity =
        (s.mult_ineq.array() * (p.a_ineq * s.x - p.b_ineq).array()).abs().maxCoeff();
  }
  if (p.a_eq.rows() > 0) {
    r.primal_eq = (p.a_eq * s.x - p.b_eq).lpNorm<Eigen::Infinity>();
  }
  Eigen::VectorXd stat = p.H * s.x + p.f;
  if (p.a_ineq.rows() > 0) stat += p.a_ineq.transpose() * s.mult_ineq;
  if (p.a_eq.rows() > 0) stat += p.a_eq.transpose() * s.mult_eq;
  r.stationarity = stat.lpNorm<Eigen::Infinity>();
  return r;
}

QpSolution solve_qp(const QpProblem& problem, double tol, int max_iter) {
  check_problem(problem);
  const Eigen::Index n = problem.H.cols();
  const Eigen::Index n_eq = problem.a_eq.rows();
  const Eigen::Index n_ineq = problem.a_ineq.rows();
  const Eigen::Index total = n_eq + n_ineq;

  ConstraintView view;
  view.n_eq = n_eq;
  view.normals.resize(n, total);
  view.rhs.resize(total);
  for (Eigen::Index i = 0; i < n_eq; ++i) {
    view.normals.col(i) = -problem.a_eq.row(i).transpose();
    view.rhs[i] = -problem.b_eq[i];
  }
  for (Eigen::Index i = 0; i < n_ineq; ++i) {
    view.normals.col(n_eq + i) = -problem.a_ineq.row(i).transpose();
    view.rhs[n_eq + i] = -problem.b_ineq[i];
  }

  const Eigen::LLT<Eigen::MatrixXd> h_llt(problem.H);
  Eigen::VectorXd x = h_llt.solve(-problem.f);

  std::vector<Eigen::Index> active;
  std::vector<double> lambda;  // aligned with `active`
  std::vector<char> is_active(static_cast<std::size_t>(total), 0);
  Eigen::VectorXd z, rv;

  const auto apply_dual_step = [&](double t) {
    for (std::size_t k = 0; k < lambda.size(); ++k) {
      lambda[k] -= t * rv[static_cast<Eigen::Index>(k)];
    }
  };

  // Install the equality rows first. Their multipliers are sign-free, they
  // never leave the active set, and a dependent-but-inconsistent row is an
  // infeasibility certificate on its own.
  for (Eigen::Index e = 0; e < n_eq; ++e) {
    directions(h_llt, problem.H, view, active, e, z, rv);
    const double denom = z.dot(view.normals.col(e));
    const double s = view.slack(e, x);
    if (denom > kDependenceTol * std::max(1.0, view.normals.col(e).squaredNorm())) {
      const double t = -s / denom;  // sign-free step onto the hyperplane
      x += t * z;
      apply_dual_step(t);
      active.push_back(e);
      lambda.push_back(t);
      is_active[static_cast<std::size_t>(e)] = 1;
    } else if (std::abs(s) > tol * std::max(1.0, std::abs(view.rhs[e]))) {
      return failed(QpStatus::infeasible, n, n_ineq, n_eq);
    }
    // else: dependent and consistent; keep it passive with zero multiplier
  }

  int additions = 0;
  const int add_budget = std::max(max_iter, static_cast<int>(3 * total) + 10);
  while (true) {
    // Most violated inactive inequality; strict < breaks ties at the
    // lowest index for determinism.
    Eigen::Index p = -1;
    double worst = -tol;
    for (Eigen::Index i = 0; i < n_ineq; ++i) {
      const Eigen::Index row = n_eq + i;
      if (is_active[static_cast<std::size_t>(row)]) continue;
      const double s = view.slack(row, x);
      if (s < worst) {
        worst = s;
        p = row;
      }
    }
    if (p < 0) break;  // primal feasible, hence optimal
    if (++additions > add_budget) return failed(QpStatus::iteration_limit, n, n_ineq, n_eq);

    double u = 0.0;  // multiplier of p accumulated across partial steps
    int inner_budget = static_cast<int>(n + total) + 5;
    while (true) {
      if (--inner_budget < 0) return failed(QpStatus::iteration_limit, n, n_ineq, n_eq);
      directions(h_llt, problem.H, view, active, p, z, rv);
      const double s_p = view.slack(p, x);
      const double denom = z.dot(view.normals.col(p));
      const bool have_primal =
          denom > kDependenceTol * std::max(1.0, view.normals.col(p).squaredNorm());

      // Dual step bound: first active inequality multiplier driven to zero.
      double t1 = kInf;
      std::size_t leaving = 0;
      for (std::size_t k = 0; k < active.size(); ++k) {
        if (active[k] < n_eq) continue;  // equality multipliers never block
        const double rate = rv[static_cast<Eigen::Index>(k)];
        if (rate > kDependenceTol) {
          const double cand = lambda[k] / rate;
          if (cand < t1) {
            t1 = cand;
            leaving = k;
          }
        }
      }
      // Primal step: multiplier increase that closes the violation of p.
      const double t2 = have_primal ? -s_p / denom : kInf;

      if (t1 == kInf && t2 == kInf) {
        // No multiplier can yield and p cannot be satisfied: the dual is
        // unbounded, so the primal constraint set is empty.
        return failed(QpStatus::infeasible, n, n_ineq, n_eq);
      }

      if (t2 <= t1) {  // full step; p enters the active set satisfied
        x += t2 * z;
        apply_dual_step(t2);
        u += t2;
        active.push_back(p);
        lambda.push_back(u);
        is_active[static_cast<std::size_t>(p)] = 1;
        break;
      }
      // Partial step: move as far as the leaving multiplier allows, drop
      // that row, and retry the same p against the smaller active set.
      x += t1 * z;
      apply_dual_step(t1);
      u += t1;
      is_active[static_cast<std::size_t>(active[leaving])] = 0;
      active.erase(active.begin() + static_cast<std::ptrdiff_t>(leaving));
      lambda.erase(lambda.begin() + static_cast<std::ptrdiff_t>(leaving));
    }
  }

  // Polish: one exact KKT solve on the final active set removes the
  // roundoff accumulated by the incremental updates.
  const Eigen::Index q = static_cast<Eigen::Index>(active.size());
  Eigen::VectorXd mult = Eigen::VectorXd::Zero(q);
  if (q > 0) {
    Eigen::MatrixXd kkt = Eigen::MatrixXd::Zero(n + q, n + q);
    kkt.topLeftCorner(n, n) = problem.H;
    Eigen::VectorXd rhs(n + q);
    rhs.head(n) = -problem.f;
    for (Eigen::Index k = 0; k < q; ++k) {
      const Eigen::Index row = active[static_cast<std::size_t>(k)];
      kkt.block(0, n + k, n, 1) = view.normals.col(row);
      kkt.block(n + k, 0, 1, n) = view.normals.col(row).transpose();
      rhs[n + k] = view.rhs[row];
    }
    const Eigen::VectorXd sol = kkt.fullPivLu().solve(rhs);
    x = sol.head(n);
    mult = -sol.tail(q);  // stationarity is H x + f = sum(mult_k * normal_k)
  } else {
    x = h_llt.solve(-problem.f);
  }

  QpSolution sol;
  sol.status = QpStatus::optimal;
  sol.x = x;
  sol.mult_ineq = Eigen::VectorXd::Zero(n_ineq);
  sol.mult_eq = Eigen::VectorXd::Zero(n_eq);
  for (Eigen::Index k = 0; k < q; ++k) {
    const Eigen::Index row = active[static_cast<std::size_t>(k)];
    if (row < n_eq) {
      sol.mult_eq[row] = mult[k];
    } else {
      sol.mult_ineq[row - n_eq] = std::max(0.0, mult[k]);
      sol.active_set.push_back(static_cast<int>(row - n_eq));
    }
  }
  std::sort(sol.active_set.begin(), sol.active_set.end());
  sol.objective = 0.5 * x.dot(problem.H * x) + problem.f.dot(x);
  return sol;
}

}  // namespace cbfsim
