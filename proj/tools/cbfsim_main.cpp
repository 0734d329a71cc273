// Command-line driver: closed-loop simulation of a torque-controlled arm
// with a barrier-function safety filter, parameter searches over the filter
// gains, and a small neural network that predicts gains from obstacle size.
#include <chrono>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "cbfsim/cbf_filter.hpp"
#include "cbfsim/csv_io.hpp"
#include "cbfsim/errors.hpp"
#include "cbfsim/mlp.hpp"
#include "cbfsim/param_search.hpp"
#include "cbfsim/scenario.hpp"
#include "cbfsim/scoreboard.hpp"
#include "cbfsim/sim_engine.hpp"
#include "cbfsim/svg_plot.hpp"

namespace fs = std::filesystem;
using namespace cbfsim;

namespace {

nlohmann::json load_json_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open file: " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
  return j;
}

/// Scenario plus the raw document, for configs that carry search blocks.
struct LoadedConfig {
  nlohmann::json doc;
  Scenario scenario;
};

LoadedConfig load_config(const fs::path& path) {
  LoadedConfig cfg;
  cfg.doc = load_json_file(path);
  cfg.scenario = scenario_from_json(cfg.doc, path.parent_path());
  cfg.scenario.validate();
  cfg.scenario.check_safe_start();
  return cfg;
}

int resolve_workers(int flag_value, bool flag_given) {
  if (flag_given) return flag_value;
  if (const char* env = std::getenv("CBFSIM_WORKERS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end == env || *end != '\0' || v < 1) {
      throw ConfigError("CBFSIM_WORKERS must be a positive integer");
    }
    return static_cast<int>(v);
  }
  return flag_value;
}

/// Timestamps live only here so every result file stays byte-reproducible.
void write_meta(const fs::path& dir, const std::string& command, double elapsed_s) {
  const std::time_t now = std::time(nullptr);
  char stamp[32];
  std::strftime(stamp, sizeof(stamp), "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&now));
  nlohmann::json j;
  j["created"] = stamp;
  j["command"] = command;
  j["elapsed_s"] = elapsed_s;
  std::ofstream out(dir / "run_meta.json", std::ios::binary);
  if (out) out << j.dump(2) << "\n";
}

std::string join_args(int argc, char** argv) {
  std::string s;
  for (int i = 0; i < argc; ++i) {
    if (i) s += ' ';
    s += argv[i];
  }
  return s;
}

void print_run_summary(std::ostream& out, const RunResult& rr) {
  out << "good_run=" << (rr.good_run ? 1 : 0) << " min_h=" << format_double(rr.min_h)
      << " run_ctrl=" << format_double(rr.run_ctrl)
      << " run_tsep=" << format_double(rr.run_tsep)
      << " final_err=" << format_double(rr.final_err);
  if (!rr.fault.empty()) out << " fault=" << rr.fault;
  out << "\n";
}

RunEntry entry_from_result(const Scenario& sc, const RunResult& rr) {
  RunEntry entry;
  entry.r_o = sc.obstacle.radius;
  entry.kappa1 = sc.cbf.kappa1;
  entry.kappa2 = sc.cbf.kappa2;
  entry.min_h = rr.min_h;
  entry.run_ctrl = rr.run_ctrl;
  entry.run_tsep = rr.run_tsep;
  entry.final_err = rr.final_err;
  entry.good_run = rr.good_run;
  entry.fault = rr.fault;
  return entry;
}

/// Best good run per radius under the board's stored scores.
std::map<double, const RunEntry*> best_per_radius(const ScoreBoard& board) {
  std::map<double, const RunEntry*> best;
  for (const RunEntry& run : board.runs) {
    if (!run.good_run) continue;
    const RunEntry*& slot = best[run.r_o];
    if (!slot || run.score > slot->score ||
        (run.score == slot->score &&
         (run.kappa1 < slot->kappa1 ||
          (run.kappa1 == slot->kappa1 && run.kappa2 < slot->kappa2)))) {
      slot = &run;
    }
  }
  return best;
}

void report_dataset(const ScoreBoard& board, int top_k, const fs::path& out_dir) {
  const std::vector<DatasetRow> rows = export_dataset(board, top_k);
  save_dataset_csv(rows, out_dir / "dataset.csv");
  std::map<double, int> counts;
  for (const RunEntry& run : board.runs) counts.emplace(run.r_o, 0);
  for (const DatasetRow& row : rows) ++counts[row.r_o];
  for (const auto& [r_o, count] : counts) {
    if (count == 0) {
      std::cerr << "warning: no good runs for r_o=" << format_double(r_o)
                << "; radius missing from dataset\n";
    } else if (count < top_k) {
      std::cerr << "warning: only " << count << " good runs for r_o=" << format_double(r_o)
                << " (wanted " << top_k << ")\n";
    }
  }
  std::cout << "dataset: " << rows.size() << " rows -> " << (out_dir / "dataset.csv").string()
            << "\n";
}

/// Appends incremental result rows and an audit line per evaluation; the
/// final save_scoreboard_csv rewrite replaces the incremental file.
class ProgressWriter {
public:
  ProgressWriter(const fs::path& out_dir, bool resuming) {
    const fs::path results = out_dir / "results.csv";
    const bool fresh = !resuming || !fs::exists(results);
    results_.open(results, fresh ? std::ios::binary : (std::ios::binary | std::ios::app));
    if (!results_) throw ConfigError("cannot write results file: " + results.string());
    if (fresh) results_ << kResultsCsvHeader << "\n";
    log_.open(out_dir / "progress.log",
              resuming ? (std::ios::binary | std::ios::app) : std::ios::binary);
    if (resuming && log_) log_ << "# resumed\n";
  }

  void operator()(const RunEntry& run) {
    results_ << format_run_entry_csv(run) << "\n";
    results_.flush();
    if (log_) {
      log_ << "r_o=" << format_double(run.r_o) << " kappa1=" << format_double(run.kappa1)
           << " kappa2=" << format_double(run.kappa2) << " min_h=" << format_double(run.min_h)
           << " good=" << (run.good_run ? 1 : 0) << " score=" << format_double(run.score);
      if (!run.fault.empty()) log_ << " fault=" << run.fault;
      log_ << "\n";
      log_.flush();
    }
  }

private:
  std::ofstream results_;
  std::ofstream log_;
};

int cmd_simulate(const fs::path& scenario_path, const fs::path& out_dir, bool plot,
                 bool no_filter, const std::string& command) {
  const auto t0 = std::chrono::steady_clock::now();
  const Scenario sc = load_scenario(scenario_path);
  fs::create_directories(out_dir);

  SimOptions opt;
  opt.enable_filter = !no_filter;
  const RunResult rr = simulate(sc, opt);

  save_log_csv(rr, sc.robot.n_joints, out_dir / "trajectory.csv");
  ScoreBoard board;
  board.add(entry_from_result(sc, rr));
  board.rescore();
  save_scoreboard_csv(board, out_dir / "summary.csv");
  if (plot) write_run_plot(rr, sc.obstacle, sc.clearance, out_dir / "plot.svg");

  print_run_summary(std::cout, rr);
  std::cout << "trajectory: " << (out_dir / "trajectory.csv").string() << "\n";

  const double elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  write_meta(out_dir, command, elapsed);

  if (!rr.fault.empty()) {
    std::cerr << "error: run faulted: " << rr.fault << "\n";
    return 4;
  }
  return 0;
}

int cmd_grid(const fs::path& config_path, const fs::path& out_dir, int workers, bool resume,
             int top_k, const std::string& command) {
  const auto t0 = std::chrono::steady_clock::now();
  const LoadedConfig cfg = load_config(config_path);
  const GridSpec grid = grid_from_json(cfg.doc);
  fs::create_directories(out_dir);

  std::optional<ScoreBoard> prior;
  if (resume && fs::exists(out_dir / "results.csv")) {
    prior = load_scoreboard_csv(out_dir / "results.csv");
    std::cout << "resuming: " << prior->runs.size() << " runs already done\n";
  }

  ProgressWriter progress(out_dir, prior.has_value());
  const ScoreBoard board =
      grid_search(grid, make_sim_evaluator(cfg.scenario), workers,
                  prior ? &*prior : nullptr, std::ref(progress));
  save_scoreboard_csv(board, out_dir / "results.csv");

  std::cout << "grid: " << board.runs.size() << " runs ("
            << grid.r_o_values.size() << " radii x " << grid.kappa_values.size() << "^2 gains)\n";
  for (const auto& [r_o, run] : best_per_radius(board)) {
    std::cout << "best r_o=" << format_double(r_o) << ": kappa1=" << format_double(run->kappa1)
              << " kappa2=" << format_double(run->kappa2)
              << " score=" << format_double(run->score) << "\n";
  }
  report_dataset(board, top_k, out_dir);

  const double elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  std::cout << "elapsed: " << format_double(elapsed) << " s\n";
  write_meta(out_dir, command, elapsed);
  return 0;
}

int cmd_guided(const fs::path& config_path, const fs::path& out_dir, bool resume, int top_k,
               const std::string& command) {
  const auto t0 = std::chrono::steady_clock::now();
  const LoadedConfig cfg = load_config(config_path);
  const GuidedConfig guided = guided_from_json(cfg.doc);

  std::vector<double> radii;
  if (cfg.doc.contains("guided") && cfg.doc["guided"].contains("r_o_values")) {
    radii = cfg.doc["guided"]["r_o_values"].get<std::vector<double>>();
  } else {
    radii = {cfg.scenario.obstacle.radius};
  }
  if (radii.empty()) throw ConfigError("guided.r_o_values must be nonempty");

  fs::create_directories(out_dir);

  // Partition a prior results file by radius, preserving row order, so each
  // per-radius search can replay its own decision history.
  std::map<double, ScoreBoard> prior;
  if (resume && fs::exists(out_dir / "results.csv")) {
    const ScoreBoard all = load_scoreboard_csv(out_dir / "results.csv");
    for (const RunEntry& run : all.runs) prior[run.r_o].add(run);
    std::cout << "resuming: " << all.runs.size() << " runs already done\n";
  }

  ProgressWriter progress(out_dir, !prior.empty());
  const RunEvaluator evaluate = make_sim_evaluator(cfg.scenario);

  ScoreBoard combined;
  int total_evals = 0;
  for (double r_o : radii) {
    const auto it = prior.find(r_o);
    const GuidedResult res = guided_search(guided, r_o, evaluate,
                                           it != prior.end() ? &it->second : nullptr,
                                           std::ref(progress));
    total_evals += res.evals;
    for (const RunEntry& run : res.board.runs) combined.add(run);
    std::cout << "r_o=" << format_double(r_o) << ": ";
    if (res.found_good) {
      std::cout << "best kappa1=" << format_double(res.best.kappa1)
                << " kappa2=" << format_double(res.best.kappa2)
                << " score=" << format_double(res.best_score);
    } else {
      std::cout << "no good run found";
    }
    std::cout << " runs=" << res.board.runs.size() << " new_evals=" << res.evals;
    if (res.truncated) std::cout << " (budget cap hit)";
    std::cout << "\n";
  }

  // Scores stay relative to each radius's own search population; the
  // combined file is not re-pooled.
  save_scoreboard_csv(combined, out_dir / "results.csv");
  report_dataset(combined, top_k, out_dir);

  std::cout << "guided: " << combined.runs.size() << " total runs, " << total_evals
            << " new evaluations across " << radii.size() << " radii\n";
  const double elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  std::cout << "elapsed: " << format_double(elapsed) << " s\n";
  write_meta(out_dir, command, elapsed);
  return 0;
}

int cmd_train(const fs::path& dataset_path, const fs::path& out_dir, const TrainConfig& config,
              const std::string& command) {
  const auto t0 = std::chrono::steady_clock::now();
  const std::vector<DatasetRow> rows = load_dataset_csv(dataset_path);
  if (rows.empty()) throw ConfigError("dataset has no rows: " + dataset_path.string());
  fs::create_directories(out_dir);

  std::vector<double> curve;
  const MlpModel model = train_mlp(rows, config, &curve);
  save_mlp(model, out_dir / "model.json");

  std::ofstream loss_csv(out_dir / "loss_curve.csv", std::ios::binary);
  loss_csv << "epoch,loss\n";
  for (std::size_t e = 0; e < curve.size(); ++e) {
    loss_csv << e << ',' << format_double(curve[e]) << "\n";
  }

  std::cout << "trained on " << rows.size() << " rows: best loss "
            << format_double(model.final_loss) << " after " << model.epochs_run << " epochs\n";
  std::cout << "model: " << (out_dir / "model.json").string() << "\n";
  const double elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  write_meta(out_dir, command, elapsed);
  return 0;
}

int cmd_predict(const fs::path& model_path, double radius, bool run,
                const fs::path& scenario_path, const fs::path& out_dir, bool plot,
                const std::string& command) {
  const MlpModel model = load_mlp(model_path);
  bool clamped = false;
  const Eigen::Vector2d pred = mlp_predict(model, radius, &clamped);
  if (clamped) {
    std::cerr << "warning: radius " << format_double(radius) << " outside trained range ["
              << format_double(model.input_min) << ", " << format_double(model.input_max)
              << "]; prediction clamped\n";
  }
  std::cout << "kappa1=" << format_double(pred[0]) << " kappa2=" << format_double(pred[1])
            << "\n";
  if (!run) return 0;

  const auto t0 = std::chrono::steady_clock::now();
  const Scenario base = load_scenario(scenario_path);
  const Scenario sc = with_params(base, radius, CbfParams{pred[0], pred[1]});
  sc.check_safe_start();
  fs::create_directories(out_dir);

  const RunResult rr = simulate(sc, SimOptions{});
  save_log_csv(rr, sc.robot.n_joints, out_dir / "trajectory.csv");
  ScoreBoard board;
  board.add(entry_from_result(sc, rr));
  board.rescore();
  save_scoreboard_csv(board, out_dir / "summary.csv");
  if (plot) write_run_plot(rr, sc.obstacle, sc.clearance, out_dir / "plot.svg");
  print_run_summary(std::cout, rr);

  const double elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  write_meta(out_dir, command, elapsed);
  if (!rr.fault.empty()) {
    std::cerr << "error: run faulted: " << rr.fault << "\n";
    return 4;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Manipulator obstacle-avoidance sandbox: barrier-filtered torque control,\n"
               "gain searches, and gain prediction from obstacle size."};
  app.require_subcommand(1);
  const std::string command = join_args(argc, argv);

  // simulate
  std::string sim_scenario;
  std::string sim_out = "out";
  bool sim_plot = false;
  bool sim_no_filter = false;
  CLI::App* sim = app.add_subcommand("simulate", "Run one closed-loop scenario");
  sim->add_option("scenario", sim_scenario, "Scenario JSON file")->required();
  sim->add_option("--out", sim_out, "Output directory");
  sim->add_flag("--plot", sim_plot, "Also write plot.svg");
  sim->add_flag("--no-filter", sim_no_filter, "Disable the safety filter (baseline run)");

  // grid
  std::string grid_config;
  std::string grid_out = "out";
  int grid_workers = 1;
  bool grid_resume = false;
  int grid_top = 5;
  CLI::App* grid = app.add_subcommand("grid", "Exhaustive gain sweep over a lattice");
  grid->add_option("--config", grid_config, "Scenario JSON with a 'grid' block")->required();
  grid->add_option("--out", grid_out, "Output directory");
  CLI::Option* grid_workers_opt =
      grid->add_option("--workers", grid_workers, "Parallel simulations (or CBFSIM_WORKERS)");
  grid->add_flag("--resume", grid_resume, "Skip combinations already in results.csv");
  grid->add_option("--top", grid_top, "Dataset rows kept per radius");

  // guided
  std::string guided_config;
  std::string guided_out = "out";
  bool guided_resume = false;
  int guided_top = 5;
  CLI::App* guided = app.add_subcommand("guided", "Score-guided gain walk per radius");
  guided->add_option("--config", guided_config, "Scenario JSON with a 'guided' block")
      ->required();
  guided->add_option("--out", guided_out, "Output directory");
  guided->add_flag("--resume", guided_resume, "Replay results.csv and continue");
  guided->add_option("--top", guided_top, "Dataset rows kept per radius");

  // train
  std::string train_dataset;
  std::string train_out = "out";
  TrainConfig train_cfg;
  CLI::App* train = app.add_subcommand("train", "Fit the gain-prediction network");
  train->add_option("--dataset", train_dataset, "Dataset CSV (r_o,kappa1,kappa2,rank,score)")
      ->required();
  train->add_option("--out", train_out, "Output directory");
  train->add_option("--lr", train_cfg.learning_rate, "Learning rate");
  train->add_option("--epochs", train_cfg.epochs, "Gradient-descent epochs");
  train->add_option("--seed", train_cfg.seed, "Weight-init seed");
  train->add_option("--patience", train_cfg.patience,
                    "Stop after this many epochs without improvement (0 = off)");
  train->add_option("--hidden", train_cfg.hidden, "Hidden layer sizes");
  train->add_option("--kappa-max", train_cfg.kappa_max, "Gain normalization scale");

  // predict
  std::string predict_model;
  double predict_radius = 0.0;
  bool predict_run = false;
  std::string predict_scenario;
  std::string predict_out = "out";
  bool predict_plot = false;
  CLI::App* predict = app.add_subcommand("predict", "Predict gains for an obstacle radius");
  predict->add_option("--model", predict_model, "Trained model JSON")->required();
  predict->add_option("--radius", predict_radius, "Obstacle radius [m]")->required();
  predict->add_flag("--run", predict_run, "Also simulate with the predicted gains");
  predict->add_option("--scenario", predict_scenario, "Scenario JSON (required with --run)");
  predict->add_option("--out", predict_out, "Output directory for --run");
  predict->add_flag("--plot", predict_plot, "Also write plot.svg for --run");

  int rc = 0;
  sim->callback([&] { rc = cmd_simulate(sim_scenario, sim_out, sim_plot, sim_no_filter, command); });
  grid->callback([&] {
    const int workers = resolve_workers(grid_workers, grid_workers_opt->count() > 0);
    rc = cmd_grid(grid_config, grid_out, workers, grid_resume, grid_top, command);
  });
  guided->callback(
      [&] { rc = cmd_guided(guided_config, guided_out, guided_resume, guided_top, command); });
  train->callback([&] { rc = cmd_train(train_dataset, train_out, train_cfg, command); });
  predict->callback([&] {
    if (predict_run && predict_scenario.empty()) {
      throw ConfigError("--run requires --scenario");
    }
    rc = cmd_predict(predict_model, predict_radius, predict_run, predict_scenario, predict_out,
                     predict_plot, command);
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;  // help/version exit cleanly; anything else is usage
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const PreconditionError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const RuntimeFault& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 4;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 4;
  }
  return rc;
}
