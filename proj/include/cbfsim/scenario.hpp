#pragma once

#include <filesystem>
#include <string>

#include <nlohmann/json_fwd.hpp>

#include "cbfsim/cbf_filter.hpp"
#include "cbfsim/ctc.hpp"
#include "cbfsim/robot_model.hpp"
#include "cbfsim/trajectory.hpp"

namespace cbfsim {

/// One complete closed-loop experiment.
struct Scenario {
  RobotModel robot;
  TrajectorySpec trajectory;
  Obstacle obstacle;
  ClearanceSpec clearance;
  CbfParams cbf;
  CtcGains gains;
  bool wrist_lock = false;
  double dt = 1e-3;      // s
  double duration = 0.0; // s, >= trajectory.duration
  JointState initial_state;

  double end_tol = 0.01;            // m, goodRun terminal-tracking gate
  bool effort_uses_tau_qp = false;  // RunCtrl integrand: |tau_safe| or |tau_qp|

  /// Structural checks (dt, duration, gain positivity, dimensions).
  /// Throws ConfigError.
  void validate() const;

  /// Safe-start contract: h at the initial end-effector position must be
  /// strictly positive. Throws PreconditionError.
  void check_safe_start() const;
};

/// Parses a scenario JSON object. `base_dir` resolves a robot model given
/// by file path. An obstacle center of "auto" (or omitted) is placed on the
/// nominal end-effector path at mid-sweep. An omitted initial_state starts
/// on the trajectory at t = 0.
Scenario scenario_from_json(const nlohmann::json& j, const std::filesystem::path& base_dir);

/// Loads, validates, and safe-start-checks a scenario file.
Scenario load_scenario(const std::filesystem::path& path);

/// Scenario with the obstacle radius and CBF gains replaced (the knobs the
/// parameter searches turn).
Scenario with_params(const Scenario& base, double r_o, const CbfParams& params);

}  // namespace cbfsim
