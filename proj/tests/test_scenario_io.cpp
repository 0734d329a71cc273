#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <random>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "cbfsim/csv_io.hpp"
#include "cbfsim/errors.hpp"
#include "cbfsim/robot_dynamics.hpp"
#include "cbfsim/scenario.hpp"
#include "cbfsim/sim_engine.hpp"
#include "cbfsim/svg_plot.hpp"
#include "cbfsim/trajectory.hpp"
#include "support/test_models.hpp"
#include "support/two_link.hpp"

using namespace cbfsim;
using namespace testsupport;

namespace {

/// Scenario JSON with the robot embedded inline, centered on the planar
/// two-link arm the rest of the suite uses.
nlohmann::json two_link_json() {
  const TwoLink arm;
  nlohmann::json j;
  j["robot"] = arm.model().to_json();
  j["trajectory"] = {{"sweep_joint", 0},
                     {"theta_start", -1.0},
                     {"theta_end", 1.0},
                     {"duration", 1.5},
                     {"home_posture", {-1.0, 0.8}}};
  j["obstacle"] = {{"radius", 0.15}, {"center", "auto"}};
  j["clearance"] = {{"r_ee", 0.05}, {"r_pad", 0.02}};
  j["cbf"] = {{"kappa1", 20.0}, {"kappa2", 20.0}};
  j["gains"] = {{"kp", 100.0}, {"kd", 20.0}};
  j["dt"] = 1e-3;
  j["duration"] = 2.0;
  j["end_tol"] = 0.01;
  return j;
}

struct TempDir {
  std::filesystem::path path;
  TempDir() {
    path = std::filesystem::temp_directory_path() /
           ("cbfsim_io_" + std::to_string(std::random_device{}()));
    std::filesystem::create_directories(path);
  }
  ~TempDir() { std::filesystem::remove_all(path); }
};

std::filesystem::path write_json(const TempDir& dir, const std::string& name,
                                 const nlohmann::json& j) {
  const auto p = dir.path / name;
  std::ofstream out(p);
  out << j.dump(2);
  return p;
}

}  // namespace

TEST_CASE("inline scenario JSON parses into the expected fields") {
  const Scenario sc = scenario_from_json(two_link_json(), ".");

  CHECK(sc.robot.n_joints == 2);
  CHECK(sc.trajectory.sweep_joint == 0);
  CHECK(sc.trajectory.theta_start == -1.0);
  CHECK(sc.trajectory.duration == 1.5);
  CHECK(sc.obstacle.radius == 0.15);
  CHECK(sc.clearance.r_ee == 0.05);
  CHECK(sc.clearance.r_pad == 0.02);
  CHECK(sc.cbf.kappa1 == 20.0);
  CHECK(sc.gains.kp == 100.0);
  CHECK(sc.gains.kd == 20.0);
  CHECK(!sc.wrist_lock);  // defaulted
  CHECK(sc.dt == 1e-3);
  CHECK(sc.duration == 2.0);
  CHECK(sc.end_tol == 0.01);
  CHECK(!sc.effort_uses_tau_qp);
}

TEST_CASE("robot model JSON round-trips bitwise") {
  const RobotModel model = make_arm6();
  const RobotModel back = RobotModel::from_json(model.to_json());

  REQUIRE(back.n_joints == model.n_joints);
  CHECK(back.gravity == model.gravity);
  CHECK(back.friction == model.friction);
  for (int i = 0; i < model.n_joints; ++i) {
    CHECK(back.links[i].a == model.links[i].a);
    CHECK(back.links[i].alpha == model.links[i].alpha);
    CHECK(back.links[i].d == model.links[i].d);
    CHECK(back.links[i].theta_offset == model.links[i].theta_offset);
    CHECK(back.links[i].mass == model.links[i].mass);
    CHECK(back.links[i].com == model.links[i].com);
    CHECK(back.links[i].inertia == model.links[i].inertia);
  }
}

TEST_CASE("an 'auto' or omitted obstacle center lands on the mid-sweep path point") {
  const Scenario sc = scenario_from_json(two_link_json(), ".");

  Dynamics dyn(sc.robot);
  const TrajectorySample mid = sample_trajectory(sc.trajectory, sc.trajectory.duration / 2.0);
  const Eigen::Vector3d expect = dyn.forward_kinematics(mid.q_d);
  CHECK(sc.obstacle.center == expect);

  nlohmann::json no_center = two_link_json();
  no_center["obstacle"].erase("center");
  CHECK(scenario_from_json(no_center, ".").obstacle.center == expect);

  nlohmann::json fixed = two_link_json();
  fixed["obstacle"]["center"] = {0.3, -0.4, 0.5};
  const Scenario sf = scenario_from_json(fixed, ".");
  CHECK(sf.obstacle.center == Eigen::Vector3d(0.3, -0.4, 0.5));

  nlohmann::json bad = two_link_json();
  bad["obstacle"]["center"] = "midway";
  CHECK_THROWS_AS(scenario_from_json(bad, "."), ConfigError);
}

TEST_CASE("an omitted initial state starts on the trajectory at t = 0") {
  const Scenario sc = scenario_from_json(two_link_json(), ".");
  const TrajectorySample start = sample_trajectory(sc.trajectory, 0.0);
  CHECK(sc.initial_state.q == start.q_d);
  CHECK(sc.initial_state.dq == start.dq_d);
  CHECK(sc.initial_state.dq.cwiseAbs().maxCoeff() == 0.0);  // quintic starts at rest

  // q given without dq: velocities default to zero.
  nlohmann::json with_q = two_link_json();
  with_q["initial_state"] = {{"q", {-0.9, 0.7}}};
  const Scenario sq = scenario_from_json(with_q, ".");
  CHECK(sq.initial_state.q == Eigen::Vector2d(-0.9, 0.7));
  CHECK(sq.initial_state.dq == Eigen::Vector2d(0.0, 0.0));

  nlohmann::json with_both = two_link_json();
  with_both["initial_state"] = {{"q", {-0.9, 0.7}}, {"dq", {0.1, -0.2}}};
  CHECK(scenario_from_json(with_both, ".").initial_state.dq == Eigen::Vector2d(0.1, -0.2));
}

TEST_CASE("scenario validation rejects inconsistent timing and sizing") {
  nlohmann::json j = two_link_json();
  j["dt"] = 0.0;
  CHECK_THROWS_AS(scenario_from_json(j, "."), ConfigError);

  j = two_link_json();
  j["duration"] = 1.0;  // shorter than the 1.5 s trajectory
  CHECK_THROWS_AS(scenario_from_json(j, "."), ConfigError);

  j = two_link_json();
  j["end_tol"] = -0.01;
  CHECK_THROWS_AS(scenario_from_json(j, "."), ConfigError);

  j = two_link_json();
  j["wrist_lock"] = true;  // needs >= 4 joints, arm has 2
  CHECK_THROWS_AS(scenario_from_json(j, "."), ConfigError);

  j = two_link_json();
  j["trajectory"]["home_posture"] = {-1.0, 0.8, 0.3};
  CHECK_THROWS_AS(scenario_from_json(j, "."), ConfigError);

  j = two_link_json();
  j["initial_state"] = {{"q", {1.0, 2.0, 3.0}}};
  CHECK_THROWS_AS(scenario_from_json(j, "."), ConfigError);

  j = two_link_json();
  j["cbf"]["kappa1"] = 0.0;
  CHECK_THROWS_AS(scenario_from_json(j, "."), ConfigError);
}

TEST_CASE("loading a scenario file resolves the robot path and gates the start") {
  TempDir tmp;

  // Robot referenced by relative path next to the scenario file.
  const TwoLink arm;
  write_json(tmp, "robot.json", arm.model().to_json());
  nlohmann::json j = two_link_json();
  j["robot"] = "robot.json";
  const auto path = write_json(tmp, "scenario.json", j);

  const Scenario sc = load_scenario(path);
  CHECK(sc.robot.n_joints == 2);

  // Same file but the obstacle sits on the start pose: the safe-start gate
  // must reject it.
  Dynamics dyn(sc.robot);
  const Eigen::Vector3d start_ee = dyn.forward_kinematics(sc.initial_state.q);
  nlohmann::json unsafe = j;
  unsafe["obstacle"]["center"] = {start_ee[0], start_ee[1], start_ee[2]};
  const auto unsafe_path = write_json(tmp, "unsafe.json", unsafe);
  CHECK_THROWS_AS(load_scenario(unsafe_path), PreconditionError);

  // A missing robot file should name the offending path.
  nlohmann::json missing = j;
  missing["robot"] = "no_such_robot.json";
  const auto missing_path = write_json(tmp, "missing.json", missing);
  try {
    load_scenario(missing_path);
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("no_such_robot.json") != std::string::npos);
  }

  CHECK_THROWS_AS(load_scenario(tmp.path / "absent.json"), ConfigError);
}

TEST_CASE("the shipped configuration files load cleanly") {
  const std::filesystem::path root = CBFSIM_SOURCE_DIR;
  const Scenario sc = load_scenario(root / "data" / "scenario_default.json");
  CHECK(sc.robot.n_joints == 6);
  CHECK(sc.duration >= sc.trajectory.duration);

  const RobotModel arm = RobotModel::load(root / "data" / "arm6.json");
  arm.validate();
  CHECK(arm.n_joints == 6);
}

TEST_CASE("with_params swaps only the obstacle radius and the gains") {
  const Scenario base = scenario_from_json(two_link_json(), ".");
  const Scenario sc = with_params(base, 0.4, CbfParams{7.0, 11.0});

  CHECK(sc.obstacle.radius == 0.4);
  CHECK(sc.cbf.kappa1 == 7.0);
  CHECK(sc.cbf.kappa2 == 11.0);

  CHECK(sc.obstacle.center == base.obstacle.center);
  CHECK(sc.clearance.r_ee == base.clearance.r_ee);
  CHECK(sc.clearance.r_pad == base.clearance.r_pad);
  CHECK(sc.gains.kp == base.gains.kp);
  CHECK(sc.gains.kd == base.gains.kd);
  CHECK(sc.dt == base.dt);
  CHECK(sc.duration == base.duration);
  CHECK(sc.end_tol == base.end_tol);
  CHECK(sc.initial_state.q == base.initial_state.q);
  CHECK(sc.trajectory.home_posture == base.trajectory.home_posture);
}

TEST_CASE("robot model validation rejects unphysical links") {
  const RobotModel good = TwoLink{}.model();

  RobotModel m = good;
  m.links[1].mass = -0.5;
  CHECK_THROWS_AS(m.validate(), ConfigError);

  m = good;
  m.links[0].inertia(0, 1) = 0.3;  // asymmetric
  CHECK_THROWS_AS(m.validate(), ConfigError);

  m = good;
  m.links[0].inertia = Eigen::Vector3d(1.0, 1.0, 3.0).asDiagonal();  // 1+1 < 3
  CHECK_THROWS_AS(m.validate(), ConfigError);

  m = good;
  m.links[0].inertia = -0.01 * Eigen::Matrix3d::Identity();  // negative definite
  CHECK_THROWS_AS(m.validate(), ConfigError);

  m = good;
  m.friction = Eigen::VectorXd::Zero(3);  // wrong length
  CHECK_THROWS_AS(m.validate(), ConfigError);

  m = good;
  m.friction[0] = -0.1;
  CHECK_THROWS_AS(m.validate(), ConfigError);

  m = good;
  m.links.pop_back();  // n_joints no longer matches
  CHECK_THROWS_AS(m.validate(), ConfigError);

  m = good;
  m.gravity[2] = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(m.validate(), ConfigError);
}

TEST_CASE("double formatting round-trips every value bitwise") {
  std::mt19937 rng(5);
  std::vector<double> values = {0.0,    1.0,    -1.0,   0.1,   -0.3333333333333333,
                                1e-300, -1e300, 3e-7,   M_PI,  -2.2250738585072014e-308,
                                1e9,    256.0,  1.0 / 3.0, 0.15};
  for (int i = 0; i < 500; ++i) {
    values.push_back(std::ldexp(uniform(rng, -1.0, 1.0), static_cast<int>(rng() % 80) - 40));
  }
  for (double v : values) {
    CHECK(parse_double(format_double(v)) == v);
  }
}

TEST_CASE("CSV line splitting keeps empty fields and exact text") {
  const std::vector<std::string> a = split_csv_line("a,b,,c");
  REQUIRE(a.size() == 4);
  CHECK(a[0] == "a");
  CHECK(a[2] == "");
  CHECK(a[3] == "c");

  const std::vector<std::string> one = split_csv_line("lonely");
  REQUIRE(one.size() == 1);
  CHECK(one[0] == "lonely");

  const std::vector<std::string> nums = split_csv_line("1,2.5,-3e-7");
  REQUIRE(nums.size() == 3);
  CHECK(parse_double(nums[2]) == -3e-7);

  CHECK_THROWS(parse_double("not_a_number"));
}

TEST_CASE("the run plot renders a deterministic standalone SVG") {
  const Scenario sc = two_link_scenario();
  SimOptions opts;
  const RunResult run = simulate(sc, opts);

  TempDir tmp;
  const auto p1 = tmp.path / "a.svg";
  const auto p2 = tmp.path / "b.svg";
  write_run_plot(run, sc.obstacle, sc.clearance, p1);
  write_run_plot(run, sc.obstacle, sc.clearance, p2);

  std::ifstream f1(p1, std::ios::binary);
  std::ifstream f2(p2, std::ios::binary);
  const std::string s1((std::istreambuf_iterator<char>(f1)), std::istreambuf_iterator<char>());
  const std::string s2((std::istreambuf_iterator<char>(f2)), std::istreambuf_iterator<char>());

  CHECK(s1 == s2);
  CHECK(s1.find("<svg") != std::string::npos);
  CHECK(s1.find("polyline") != std::string::npos);
  CHECK(s1.find("circle") != std::string::npos);
  CHECK(s1.size() > 1000);
}
