#include "cbfsim/sim_engine.hpp"

#include <cmath>
#include <fstream>
#include <limits>

#include "cbfsim/cbf_filter.hpp"
#include "cbfsim/csv_io.hpp"
#include "cbfsim/ctc.hpp"
#include "cbfsim/errors.hpp"

namespace cbfsim {

namespace {

// q_dd at the given state for a fixed torque; mass/bias evaluated in place.
void accel_into(Dynamics& dyn, const JointState& state, const Eigen::VectorXd& tau,
                Eigen::MatrixXd& mass, Eigen::VectorXd& bias, Eigen::VectorXd& qdd_out) {
  dyn.mass_matrix_into(state.q, mass);
  dyn.bias_forces_into(state.q, state.dq, bias);
  qdd_out = mass.ldlt().solve(tau - bias);
}

}  // namespace

RunResult simulate(const Scenario& sc, const SimOptions& opt) {
  Dynamics dyn(sc.robot);
  const int n = sc.robot.n_joints;
  const double dt = sc.dt;
  const long steps = std::lround(sc.duration / dt);

  JointState state = sc.initial_state;
  JointState stage;  // scratch for RK4 stage states
  stage.q.resize(n);
  stage.dq.resize(n);

  Eigen::MatrixXd mass(n, n);
  Eigen::VectorXd bias(n);
  Eigen::VectorXd k1q(n), k1dq(n), k2q(n), k2dq(n), k3q(n), k3dq(n), k4q(n), k4dq(n);
  const Eigen::VectorXd zero_tau = Eigen::VectorXd::Zero(n);

  RunResult out;
  out.min_h = std::numeric_limits<double>::infinity();
  if (opt.keep_log) out.log.reserve(static_cast<size_t>(steps) + 1);

  for (long k = 0; k <= steps; ++k) {
    const double t = static_cast<double>(k) * dt;

    if (!state.q.allFinite() || !state.dq.allFinite()) {
      out.fault = "nonfinite_state";
      break;
    }
    if (state.dq.norm() > 1e9) {  // unstable gain combos explode super-exponentially
      out.fault = "divergence";
      break;
    }

    const TrajectorySample des = sample_trajectory(sc.trajectory, t);
    const Eigen::VectorXd tau_nom = ctc_torque(dyn, state, des, sc.gains);
    if (!tau_nom.allFinite()) {
      out.fault = "nonfinite_torque";
      break;
    }

    Eigen::VectorXd tau_apply;
    Eigen::VectorXd tau_qp;
    double h;
    std::string fault;
    if (opt.enable_filter) {
      FilterResult fr =
          filter(dyn, state, tau_nom, sc.obstacle, sc.clearance, sc.cbf, sc.wrist_lock);
      tau_apply = std::move(fr.tau_safe);
      tau_qp = std::move(fr.diag.tau_qp);
      h = fr.diag.h;
      fault = std::move(fr.fault);
    } else {
      tau_apply = tau_nom;
      tau_qp = zero_tau;
      h = safety_h(dyn.forward_kinematics(state.q), sc.obstacle, sc.clearance);
    }
    if (!tau_apply.allFinite()) {
      out.fault = "nonfinite_torque";
      break;
    }

    const Eigen::Vector3d ee = dyn.forward_kinematics(state.q);
    const Eigen::Vector3d ee_des = dyn.forward_kinematics(des.q_d);
    const double sep = (ee - ee_des).norm();

    if (h < out.min_h) out.min_h = h;
    out.final_err = sep;
    if (opt.keep_log) {
      LogRow row;
      row.t = t;
      row.q = state.q;
      row.dq = state.dq;
      row.tau_nom = tau_nom;
      row.tau_qp = tau_qp;
      row.ee = ee;
      row.ee_des = ee_des;
      row.h = h;
      out.log.push_back(std::move(row));
    }
    if (!fault.empty()) {
      out.fault = std::move(fault);
      break;
    }
    if (k == steps) break;  // final row logged, no step past the horizon

    // Left-endpoint quadrature over the interval the torque is applied.
    out.run_ctrl += (sc.effort_uses_tau_qp ? tau_qp.norm() : tau_apply.norm()) * dt;
    out.run_tsep += sep * dt;

    // Classic RK4 with the applied torque held constant across the step.
    accel_into(dyn, state, tau_apply, mass, bias, k1dq);
    k1q = state.dq;

    stage.q = state.q + 0.5 * dt * k1q;
    stage.dq = state.dq + 0.5 * dt * k1dq;
    accel_into(dyn, stage, tau_apply, mass, bias, k2dq);
    k2q = stage.dq;

    stage.q = state.q + 0.5 * dt * k2q;
    stage.dq = state.dq + 0.5 * dt * k2dq;
    accel_into(dyn, stage, tau_apply, mass, bias, k3dq);
    k3q = stage.dq;

    stage.q = state.q + dt * k3q;
    stage.dq = state.dq + dt * k3dq;
    accel_into(dyn, stage, tau_apply, mass, bias, k4dq);
    k4q = stage.dq;

    state.q += (dt / 6.0) * (k1q + 2.0 * k2q + 2.0 * k3q + k4q);
    state.dq += (dt / 6.0) * (k1dq + 2.0 * k2dq + 2.0 * k3dq + k4dq);
  }

  out.good_run = evaluate_good_run(out, sc.end_tol);
  return out;
}

bool evaluate_good_run(const RunResult& result, double end_tol) {
  return result.fault.empty() && result.min_h >= 0.0 && result.final_err <= end_tol;
}

void save_log_csv(const RunResult& result, int n_joints, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write trajectory log: " + path.string());

  out << 't';
  for (const char* stem : {"q", "dq", "taunom", "tauqp"}) {
    for (int i = 1; i <= n_joints; ++i) out << ',' << stem << i;
  }
  out << ",ee_x,ee_y,ee_z,eed_x,eed_y,eed_z,h\n";

  for (const LogRow& row : result.log) {
    out << format_double(row.t);
    for (const Eigen::VectorXd* vec : {&row.q, &row.dq, &row.tau_nom, &row.tau_qp}) {
      for (int i = 0; i < n_joints; ++i) out << ',' << format_double((*vec)(i));
    }
    for (int i = 0; i < 3; ++i) out << ',' << format_double(row.ee(i));
    for (int i = 0; i < 3; ++i) out << ',' << format_double(row.ee_des(i));
    out << ',' << format_double(row.h) << "\n";
  }
}

JointState rk4_step(Dynamics& dyn, const JointState& state, double t, double dt,
                    const std::function<Eigen::VectorXd(double, const JointState&)>& torque) {
  const int n = dyn.n();
  Eigen::MatrixXd mass(n, n);
  Eigen::VectorXd bias(n);
  JointState stage;

  Eigen::VectorXd k1dq(n), k2dq(n), k3dq(n), k4dq(n);
  accel_into(dyn, state, torque(t, state), mass, bias, k1dq);
  const Eigen::VectorXd k1q = state.dq;

  stage.q = state.q + 0.5 * dt * k1q;
  stage.dq = state.dq + 0.5 * dt * k1dq;
  accel_into(dyn, stage, torque(t + 0.5 * dt, stage), mass, bias, k2dq);
  const Eigen::VectorXd k2q = stage.dq;

  stage.q = state.q + 0.5 * dt * k2q;
  stage.dq = state.dq + 0.5 * dt * k2dq;
  accel_into(dyn, stage, torque(t + 0.5 * dt, stage), mass, bias, k3dq);
  const Eigen::VectorXd k3q = stage.dq;

  stage.q = state.q + dt * k3q;
  stage.dq = state.dq + dt * k3dq;
  accel_into(dyn, stage, torque(t + dt, stage), mass, bias, k4dq);
  const Eigen::VectorXd k4q = stage.dq;

  JointState next;
  next.q = state.q + (dt / 6.0) * (k1q + 2.0 * k2q + 2.0 * k3q + k4q);
  next.dq = state.dq + (dt / 6.0) * (k1dq + 2.0 * k2dq + 2.0 * k3dq + k4dq);
  return next;
}

}  // namespace cbfsim
