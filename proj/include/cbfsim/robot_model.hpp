#pragma once

#include <Eigen/Dense>
#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

namespace cbfsim {

/// One revolute link: standard (distal) DH geometry plus inertial data.
/// `com` and `inertia` are expressed in the link's own DH frame, inertia
/// taken about the center of mass.
struct LinkSpec {
  double a = 0.0;             // m
  double alpha = 0.0;         // rad
  double d = 0.0;             // m
  double theta_offset = 0.0;  // rad, added to the joint variable
  double mass = 1.0;          // kg
  Eigen::Vector3d com = Eigen::Vector3d::Zero();        // m
  Eigen::Matrix3d inertia = Eigen::Matrix3d::Zero();    // kg m^2
};

/// Kinematic and inertial description of an n-joint serial revolute arm.
/// Immutable after load; safe to share across simulation workers.
struct RobotModel {
  int n_joints = 0;
  std::vector<LinkSpec> links;
  Eigen::Vector3d gravity{0.0, 0.0, -9.81};  // world frame, m/s^2
  Eigen::VectorXd friction;                  // viscous, N m s/rad, >= 0

  /// Throws ConfigError on any violated invariant: link count, positive
  /// masses, symmetric PSD inertias satisfying the principal-moment
  /// triangle inequality, non-negative friction.
  void validate() const;

  static RobotModel from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;

  /// Load and validate a model file. Throws ConfigError on I/O or parse
  /// failure.
  static RobotModel load(const std::filesystem::path& path);
};

/// Joint positions and velocities.
struct JointState {
  Eigen::VectorXd q;
  Eigen::VectorXd dq;

  JointState() = default;
  JointState(Eigen::VectorXd q_in, Eigen::VectorXd dq_in)
      : q(std::move(q_in)), dq(std::move(dq_in)) {}

  static JointState zero(int n) {
    return JointState(Eigen::VectorXd::Zero(n), Eigen::VectorXd::Zero(n));
  }
};

/// Throws ConfigError unless `v` has length n with all entries finite.
void check_joint_vector(const Eigen::VectorXd& v, int n, const char* what);

}  // namespace cbfsim
