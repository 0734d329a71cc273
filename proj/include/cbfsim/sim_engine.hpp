#pragma once

#include <Eigen/Dense>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "cbfsim/robot_dynamics.hpp"
#include "cbfsim/scenario.hpp"

namespace cbfsim {

/// One integration step of the closed-loop log.
struct LogRow {
  double t = 0.0;
  Eigen::VectorXd q;
  Eigen::VectorXd dq;
  Eigen::VectorXd tau_nom;
  Eigen::VectorXd tau_qp;
  Eigen::Vector3d ee = Eigen::Vector3d::Zero();
  Eigen::Vector3d ee_des = Eigen::Vector3d::Zero();
  double h = 0.0;
};

/// Full trace plus the derived run metrics used for scoring.
struct RunResult {
  std::vector<LogRow> log;
  double min_h = 0.0;      // m^2, minimum barrier value seen
  double run_ctrl = 0.0;   // N m s, integral of the torque norm
  double run_tsep = 0.0;   // m s, integral of Cartesian separation from the desired path
  double final_err = 0.0;  // m, end-effector distance to the desired endpoint
  bool good_run = false;
  std::string fault;  // empty when the run completed cleanly
};

struct SimOptions {
  bool enable_filter = true;
  /// Search workloads only need the metrics; dropping the per-step rows
  /// keeps thousands of runs cheap on memory.
  bool keep_log = true;
};

/// Integrates the scenario with fixed-step RK4 at scenario.dt. The nominal
/// computed-torque command and the barrier filter are evaluated once per
/// step and the resulting torque is held constant across the step. A QP
/// fault or a non-finite state ends the run early with a fault tag and the
/// partial log retained. Deterministic: identical scenarios produce
/// bit-identical results.
RunResult simulate(const Scenario& scenario, const SimOptions& options = {});

/// A run counts as good when it never touched the obstacle, ended within
/// end_tol (inclusive) of the desired endpoint, and raised no fault.
bool evaluate_good_run(const RunResult& result, double end_tol);

/// Writes the per-step log with columns
///   t, q1..qn, dq1..dqn, taunom1..n, tauqp1..n,
///   ee_x, ee_y, ee_z, eed_x, eed_y, eed_z, h
/// using round-trip-exact number formatting.
void save_log_csv(const RunResult& result, int n_joints, const std::filesystem::path& path);

/// Single RK4 step of q_dd = M(q)^{-1} (tau - bias(q, dq)) with the torque
/// callback re-evaluated at every internal stage. The closed-loop simulator
/// does not use this (it holds torque over the step); it exists for physics
/// checks such as energy conservation under exact compensation, where the
/// compensation must track the stage states.
JointState rk4_step(Dynamics& dyn, const JointState& state, double t, double dt,
                    const std::function<Eigen::VectorXd(double, const JointState&)>& torque);

}  // namespace cbfsim
