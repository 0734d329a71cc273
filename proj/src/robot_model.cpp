#include "cbfsim/robot_model.hpp"

#include <Eigen/Eigenvalues>
#include <fstream>

#include <nlohmann/json.hpp>

#include "cbfsim/errors.hpp"

namespace cbfsim {

namespace {

Eigen::Vector3d vec3_from_json(const nlohmann::json& j, const std::string& key) {
  if (!j.is_array() || j.size() != 3) {
    throw ConfigError("'" + key + "' must be an array of 3 numbers");
  }
  return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

Eigen::Matrix3d mat3_from_json(const nlohmann::json& j, const std::string& key) {
  if (!j.is_array() || j.size() != 3) {
    throw ConfigError("'" + key + "' must be a 3x3 array");
  }
  Eigen::Matrix3d m;
  for (int r = 0; r < 3; ++r) {
    if (!j[r].is_array() || j[r].size() != 3) {
      throw ConfigError("'" + key + "' must be a 3x3 array");
    }
    for (int c = 0; c < 3; ++c) m(r, c) = j[r][c].get<double>();
  }
  return m;
}

}  // namespace

void RobotModel::validate() const {
  if (n_joints <= 0) throw ConfigError("n_joints must be positive");
  if (static_cast<int>(links.size()) != n_joints) {
    throw ConfigError("links.length (" + std::to_string(links.size()) +
                      ") must equal n_joints (" + std::to_string(n_joints) + ")");
  }
  if (!gravity.allFinite()) throw ConfigError("gravity must be finite");
  if (friction.size() != n_joints) {
    throw ConfigError("friction must have one entry per joint");
  }
  for (int i = 0; i < n_joints; ++i) {
    if (!(friction[i] >= 0.0)) {
      throw ConfigError("friction[" + std::to_string(i) + "] must be >= 0");
    }
  }
  for (int i = 0; i < n_joints; ++i) {
    const LinkSpec& link = links[i];
    const std::string tag = "link " + std::to_string(i);
    if (!(link.mass > 0.0)) throw ConfigError(tag + ": mass must be > 0");
    if (!link.com.allFinite()) throw ConfigError(tag + ": com must be finite");
    const double scale = std::max(1.0, link.inertia.cwiseAbs().maxCoeff());
    if ((link.inertia - link.inertia.transpose()).cwiseAbs().maxCoeff() > 1e-9 * scale) {
      throw ConfigError(tag + ": inertia must be symmetric");
    }
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> es(link.inertia);
    const Eigen::Vector3d ev = es.eigenvalues();  // ascending
    if (ev[0] < -1e-9 * scale) {
      throw ConfigError(tag + ": inertia must be positive semi-definite");
    }
    // Principal moments of a rigid body obey the triangle inequality.
    if (ev[0] + ev[1] < ev[2] - 1e-9 * scale) {
      throw ConfigError(tag + ": principal moments violate the triangle inequality");
    }
  }
}

RobotModel RobotModel::from_json(const nlohmann::json& j) {
  RobotModel model;
  try {
    model.n_joints = j.at("n_joints").get<int>();
    const auto& links = j.at("links");
    if (!links.is_array()) throw ConfigError("'links' must be an array");
    for (const auto& lj : links) {
      LinkSpec link;
      link.a = lj.at("a").get<double>();
      link.alpha = lj.at("alpha").get<double>();
      link.d = lj.at("d").get<double>();
      link.theta_offset = lj.value("theta_offset", 0.0);
      link.mass = lj.at("mass").get<double>();
      link.com = vec3_from_json(lj.at("com"), "com");
      link.inertia = mat3_from_json(lj.at("inertia"), "inertia");
      model.links.push_back(link);
    }
    if (j.contains("gravity")) {
      model.gravity = vec3_from_json(j.at("gravity"), "gravity");
    }
    if (j.contains("friction")) {
      const auto& fj = j.at("friction");
      model.friction.resize(static_cast<Eigen::Index>(fj.size()));
      for (std::size_t i = 0; i < fj.size(); ++i) model.friction[static_cast<Eigen::Index>(i)] = fj[i].get<double>();
    } else {
      model.friction = Eigen::VectorXd::Zero(model.n_joints);
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("robot model: ") + e.what());
  }
  model.validate();
  return model;
}

nlohmann::json RobotModel::to_json() const {
  nlohmann::json j;
  j["n_joints"] = n_joints;
  j["links"] = nlohmann::json::array();
  for (const LinkSpec& link : links) {
    nlohmann::json lj;
    lj["a"] = link.a;
    lj["alpha"] = link.alpha;
    lj["d"] = link.d;
    lj["theta_offset"] = link.theta_offset;
    lj["mass"] = link.mass;
    lj["com"] = {link.com.x(), link.com.y(), link.com.z()};
    lj["inertia"] = {
        {link.inertia(0, 0), link.inertia(0, 1), link.inertia(0, 2)},
        {link.inertia(1, 0), link.inertia(1, 1), link.inertia(1, 2)},
        {link.inertia(2, 0), link.inertia(2, 1), link.inertia(2, 2)}};
    j["links"].push_back(lj);
  }
  j["gravity"] = {gravity.x(), gravity.y(), gravity.z()};
  j["friction"] = std::vector<double>(friction.data(), friction.data() + friction.size());
  return j;
}

RobotModel RobotModel::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open robot model file: " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("robot model " + path.string() + ": " + e.what());
  }
  return from_json(j);
}

void check_joint_vector(const Eigen::VectorXd& v, int n, const char* what) {
  if (v.size() != n) {
    throw ConfigError(std::string(what) + ": expected length " + std::to_string(n) +
                      ", got " + std::to_string(v.size()));
  }
  if (!v.allFinite()) {
    throw ConfigError(std::string(what) + ": entries must be finite");
  }
}

}  // namespace cbfsim
