#include "cbfsim/scenario.hpp"

#include <fstream>

#include <nlohmann/json.hpp>

#include "cbfsim/errors.hpp"
#include "cbfsim/robot_dynamics.hpp"

namespace cbfsim {

namespace {

Eigen::VectorXd vector_from_json(const nlohmann::json& j, const std::string& key) {
  if (!j.is_array()) throw ConfigError("'" + key + "' must be an array of numbers");
  Eigen::VectorXd v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) v[static_cast<Eigen::Index>(i)] = j[i].get<double>();
  return v;
}

}  // namespace

void Scenario::validate() const {
  robot.validate();
  trajectory.validate(robot.n_joints);
  obstacle.validate();
  clearance.validate();
  cbf.validate();
  gains.validate();
  if (!(dt > 0.0)) throw ConfigError("dt must be > 0");
  if (duration < trajectory.duration) {
    throw ConfigError("scenario duration must be >= trajectory duration");
  }
  check_joint_vector(initial_state.q, robot.n_joints, "initial_state.q");
  check_joint_vector(initial_state.dq, robot.n_joints, "initial_state.dq");
  if (!(end_tol >= 0.0)) throw ConfigError("end_tol must be >= 0");
  if (wrist_lock && robot.n_joints < 4) {
    throw ConfigError("wrist_lock requires at least 4 joints");
  }
}

void Scenario::check_safe_start() const {
  Dynamics dyn(robot);
  const Eigen::Vector3d ee = dyn.forward_kinematics(initial_state.q);
  const double h0 = safety_h(ee, obstacle, clearance);
  if (!(h0 > 0.0)) {
    throw PreconditionError("unsafe initial state: h(x0) = " + std::to_string(h0) +
                            " (must be > 0)");
  }
}

Scenario scenario_from_json(const nlohmann::json& j, const std::filesystem::path& base_dir) {
  Scenario sc;
  try {
    const auto& rj = j.at("robot");
    if (rj.is_string()) {
      std::filesystem::path robot_path = rj.get<std::string>();
      if (robot_path.is_relative()) robot_path = base_dir / robot_path;
      sc.robot = RobotModel::load(robot_path);
    } else {
      sc.robot = RobotModel::from_json(rj);
    }

    const auto& tj = j.at("trajectory");
    sc.trajectory.sweep_joint = tj.at("sweep_joint").get<int>();
    sc.trajectory.theta_start = tj.at("theta_start").get<double>();
    sc.trajectory.theta_end = tj.at("theta_end").get<double>();
    sc.trajectory.duration = tj.at("duration").get<double>();
    sc.trajectory.home_posture = vector_from_json(tj.at("home_posture"), "home_posture");

    const auto& oj = j.at("obstacle");
    sc.obstacle.radius = oj.at("radius").get<double>();
    bool auto_center = true;
    if (oj.contains("center") && !oj.at("center").is_string()) {
      sc.obstacle.center = {oj.at("center")[0].get<double>(), oj.at("center")[1].get<double>(),
                            oj.at("center")[2].get<double>()};
      auto_center = false;
    } else if (oj.contains("center") && oj.at("center").get<std::string>() != "auto") {
      throw ConfigError("obstacle.center must be [x,y,z] or \"auto\"");
    }

    const auto& cj = j.at("clearance");
    sc.clearance.r_ee = cj.at("r_ee").get<double>();
    sc.clearance.r_pad = cj.at("r_pad").get<double>();

    const auto& kj = j.at("cbf");
    sc.cbf.kappa1 = kj.at("kappa1").get<double>();
    sc.cbf.kappa2 = kj.at("kappa2").get<double>();

    const auto& gj = j.at("gains");
    sc.gains.kp = gj.at("kp").get<double>();
    sc.gains.kd = gj.at("kd").get<double>();

    sc.wrist_lock = j.value("wrist_lock", false);
    sc.dt = j.value("dt", 1e-3);
    sc.duration = j.value("duration", sc.trajectory.duration);
    sc.end_tol = j.value("end_tol", 0.01);
    sc.effort_uses_tau_qp = j.value("effort_uses_tau_qp", false);

    if (j.contains("initial_state")) {
      const auto& ij = j.at("initial_state");
      sc.initial_state.q = vector_from_json(ij.at("q"), "initial_state.q");
      if (ij.contains("dq")) {
        sc.initial_state.dq = vector_from_json(ij.at("dq"), "initial_state.dq");
      } else {
        sc.initial_state.dq = Eigen::VectorXd::Zero(sc.initial_state.q.size());
      }
    } else {
      const TrajectorySample start = sample_trajectory(sc.trajectory, 0.0);
      sc.initial_state.q = start.q_d;
      sc.initial_state.dq = start.dq_d;
    }

    if (auto_center) {
      // Place the obstacle on the nominal end-effector path at mid-sweep so
      // every run genuinely encounters it.
      Dynamics dyn(sc.robot);
      const TrajectorySample mid = sample_trajectory(sc.trajectory, sc.trajectory.duration / 2.0);
      sc.obstacle.center = dyn.forward_kinematics(mid.q_d);
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("scenario: ") + e.what());
  }

  sc.validate();
  return sc;
}

Scenario load_scenario(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open scenario file: " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("scenario " + path.string() + ": " + e.what());
  }
  Scenario sc = scenario_from_json(j, path.parent_path());
  sc.check_safe_start();
  return sc;
}

Scenario with_params(const Scenario& base, double r_o, const CbfParams& params) {
  Scenario sc = base;
  sc.obstacle.radius = r_o;
  sc.cbf = params;
  return sc;
}

}  // namespace cbfsim
