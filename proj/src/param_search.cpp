#include "cbfsim/param_search.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <tuple>

#include <nlohmann/json.hpp>

#include "cbfsim/cbf_filter.hpp"
#include "cbfsim/csv_io.hpp"
#include "cbfsim/errors.hpp"
#include "cbfsim/robot_dynamics.hpp"
#include "cbfsim/sim_engine.hpp"
#include "cbfsim/worker_pool.hpp"

namespace cbfsim {

namespace {

void check_value_list(const std::vector<double>& values, const char* what) {
  if (values.empty()) throw ConfigError(std::string(what) + " must be nonempty");
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (!(values[i] > 0.0)) throw ConfigError(std::string(what) + " must be strictly positive");
    if (i > 0 && !(values[i] > values[i - 1])) {
      throw ConfigError(std::string(what) + " must be strictly increasing");
    }
  }
}

/// Tracks the population minima so each new run can be scored exactly as a
/// full rescore would score it at that moment.
struct RunningScore {
  double ctrl_min = std::numeric_limits<double>::quiet_NaN();
  double tsep_min = std::numeric_limits<double>::quiet_NaN();

  void prime(const std::vector<RunEntry>& runs) {
    for (const RunEntry& run : runs) absorb(run);
  }

  void absorb(const RunEntry& run) {
    if (!run.good_run) return;
    if (std::isnan(ctrl_min) || run.run_ctrl < ctrl_min) ctrl_min = run.run_ctrl;
    if (std::isnan(tsep_min) || run.run_tsep < tsep_min) tsep_min = run.run_tsep;
  }

  double score(const RunEntry& run) const {
    if (!run.good_run || std::isnan(ctrl_min)) return 0.0;
    const double c = run.run_ctrl > 0.0 ? ctrl_min / run.run_ctrl : 1.0;
    const double t = run.run_tsep > 0.0 ? tsep_min / run.run_tsep : 1.0;
    return 0.5 * c + 0.5 * t;
  }
};

/// Ordering used for "the best run": higher score first, then the smaller
/// gain pair so ties resolve deterministically.
bool better_run(const RunEntry& a, const RunEntry& b) {
  if (a.score != b.score) return a.score > b.score;
  if (a.kappa1 != b.kappa1) return a.kappa1 < b.kappa1;
  return a.kappa2 < b.kappa2;
}

}  // namespace

void GridSpec::validate() const {
  check_value_list(r_o_values, "grid.r_o_values");
  check_value_list(kappa_values, "grid.kappa_values");
}

void GuidedConfig::validate() const {
  if (!(gamma > 0.0)) throw ConfigError("guided.gamma must be > 0");
  if (i_limit < 1 || j_limit < 1) throw ConfigError("guided.i_limit and j_limit must be >= 1");
  if (!(kappa2_cap_ratio >= 1.0)) throw ConfigError("guided.kappa2_cap_ratio must be >= 1");
  if (!(kappa_start > 0.0)) throw ConfigError("guided.kappa_start must be > 0");
  if (budget < 1) throw ConfigError("guided.budget must be >= 1");
}

RunEvaluator make_sim_evaluator(const Scenario& base) {
  // The returned callable builds a private Scenario per invocation, so it
  // is safe to call concurrently from the worker pool.
  return [base](double r_o, const CbfParams& params) {
    RunEntry entry;
    entry.r_o = r_o;
    entry.kappa1 = params.kappa1;
    entry.kappa2 = params.kappa2;

    const Scenario sc = with_params(base, r_o, params);
    try {
      sc.check_safe_start();
    } catch (const PreconditionError&) {
      Dynamics dyn(sc.robot);
      entry.min_h = safety_h(dyn.forward_kinematics(sc.initial_state.q), sc.obstacle,
                             sc.clearance);
      entry.fault = "unsafe_start";
      return entry;
    }

    SimOptions opt;
    opt.keep_log = false;
    const RunResult rr = simulate(sc, opt);
    entry.min_h = rr.min_h;
    entry.run_ctrl = rr.run_ctrl;
    entry.run_tsep = rr.run_tsep;
    entry.final_err = rr.final_err;
    entry.good_run = rr.good_run;
    entry.fault = rr.fault;
    return entry;
  };
}

ScoreBoard grid_search(const GridSpec& grid, const RunEvaluator& evaluate, int workers,
                       const ScoreBoard* resume, const std::function<void(const RunEntry&)>& on_run) {
  grid.validate();
  if (workers < 1) throw ConfigError("worker count must be >= 1");

  ScoreBoard board;
  std::set<std::tuple<double, double, double>> done;
  if (resume) {
    board = *resume;
    for (const RunEntry& run : board.runs) done.insert({run.r_o, run.kappa1, run.kappa2});
  }

  struct Combo {
    double r_o, kappa1, kappa2;
  };
  std::vector<Combo> pending;
  pending.reserve(grid.r_o_values.size() * grid.kappa_values.size() * grid.kappa_values.size());
  for (double r_o : grid.r_o_values) {
    for (double k1 : grid.kappa_values) {
      for (double k2 : grid.kappa_values) {
        if (!done.count({r_o, k1, k2})) pending.push_back({r_o, k1, k2});
      }
    }
  }

  RunningScore scorer;
  scorer.prime(board.runs);

  // Chunked fan-out: results are appended in submission order so logs and
  // resume files are deterministic for any worker count, and an interrupt
  // loses at most one chunk.
  const std::size_t chunk = static_cast<std::size_t>(workers) * 8;
  std::vector<RunEntry> slots;
  for (std::size_t start = 0; start < pending.size(); start += chunk) {
    const int m = static_cast<int>(std::min(chunk, pending.size() - start));
    slots.assign(static_cast<std::size_t>(m), RunEntry{});
    parallel_for(m, workers, [&](int i) {
      const Combo& c = pending[start + static_cast<std::size_t>(i)];
      slots[static_cast<std::size_t>(i)] = evaluate(c.r_o, CbfParams{c.kappa1, c.kappa2});
    });
    for (int i = 0; i < m; ++i) {
      RunEntry& entry = slots[static_cast<std::size_t>(i)];
      scorer.absorb(entry);
      entry.score = scorer.score(entry);
      board.add(entry);
      if (on_run) on_run(board.runs.back());
    }
  }

  board.rescore();
  return board;
}

GuidedResult guided_search(const GuidedConfig& config, double r_o, const RunEvaluator& evaluate,
                           const ScoreBoard* resume, const std::function<void(const RunEntry&)>& on_run) {
  config.validate();
  if (!(r_o > 0.0)) throw ConfigError("guided search obstacle radius must be > 0");

  GuidedResult out;
  ScoreBoard& board = out.board;

  double kappa1 = config.kappa_start;
  double kappa2 = config.kappa_start;
  double best_score = 0.0;  // decision-rule best; only good runs exceed it
  int i_count = 0;          // consecutive decreasing scores inside this kappa1 scope
  int j_count = 0;          // consecutive decreasing scores across scopes
  int scope_runs = 0;
  double prev_scope_score = 0.0;
  double prev_global_score = 0.0;
  bool any_run = false;
  RunningScore scorer;

  std::size_t replay_idx = 0;
  const std::vector<RunEntry>* replay = resume ? &resume->runs : nullptr;

  for (;;) {
    // Close the scope rather than evaluate past the kappa2 cap; an improving
    // run inside [ratio*k1, ratio*k1 + gamma) would otherwise step past it.
    if (kappa2 >= config.kappa2_cap_ratio * kappa1 + config.gamma) {
      kappa1 += config.gamma;
      kappa2 = config.kappa_start;
      i_count = 0;
      scope_runs = 0;
      continue;
    }

    const bool replaying = replay && replay_idx < replay->size();
    if (!replaying && static_cast<int>(board.runs.size()) >= config.budget) {
      out.truncated = true;
      break;
    }

    RunEntry entry;
    if (replaying) {
      entry = (*replay)[replay_idx++];
      if (entry.r_o != r_o || entry.kappa1 != kappa1 || entry.kappa2 != kappa2) {
        throw ConfigError("resume board does not replay to the guided configuration");
      }
    } else {
      entry = evaluate(r_o, CbfParams{kappa1, kappa2});
      ++out.evals;
    }

    scorer.absorb(entry);
    const double fresh = scorer.score(entry);
    entry.score = fresh;
    board.add(entry);
    if (!replaying && on_run) on_run(board.runs.back());

    if (scope_runs > 0) i_count = fresh < prev_scope_score ? i_count + 1 : 0;
    if (any_run) j_count = fresh < prev_global_score ? j_count + 1 : 0;
    ++scope_runs;
    prev_scope_score = fresh;
    prev_global_score = fresh;
    any_run = true;

    if (fresh > best_score) {
      best_score = fresh;
      kappa2 += config.gamma;
    } else if (i_count >= config.i_limit || kappa2 >= config.kappa2_cap_ratio * kappa1) {
      kappa1 += config.gamma;
      kappa2 = config.kappa_start;
      i_count = 0;
      scope_runs = 0;
    } else if (j_count >= config.j_limit) {
      break;  // finished
    } else {
      kappa2 += config.gamma;
    }
  }

  board.rescore();
  const RunEntry* best = nullptr;
  for (const RunEntry& run : board.runs) {
    if (!run.good_run) continue;
    if (!best || better_run(run, *best)) best = &run;
  }
  if (best) {
    out.best = CbfParams{best->kappa1, best->kappa2};
    out.best_score = best->score;
    out.found_good = true;
  } else {
    out.best = CbfParams{config.kappa_start, config.kappa_start};
  }
  return out;
}

std::vector<DatasetRow> export_dataset(const ScoreBoard& board, int k) {
  if (k < 1) throw ConfigError("dataset top-k must be >= 1");

  std::vector<double> radii;
  for (const RunEntry& run : board.runs) radii.push_back(run.r_o);
  std::sort(radii.begin(), radii.end());
  radii.erase(std::unique(radii.begin(), radii.end()), radii.end());

  std::vector<DatasetRow> rows;
  for (double r_o : radii) {
    std::vector<const RunEntry*> good;
    for (const RunEntry& run : board.runs) {
      if (run.r_o == r_o && run.good_run) good.push_back(&run);
    }
    std::stable_sort(good.begin(), good.end(),
                     [](const RunEntry* a, const RunEntry* b) { return better_run(*a, *b); });
    const int take = std::min<int>(k, static_cast<int>(good.size()));
    for (int i = 0; i < take; ++i) {
      rows.push_back({r_o, good[static_cast<std::size_t>(i)]->kappa1,
                      good[static_cast<std::size_t>(i)]->kappa2, i + 1,
                      good[static_cast<std::size_t>(i)]->score});
    }
  }
  return rows;
}

const char* const kDatasetCsvHeader = "r_o,kappa1,kappa2,rank,score";

void save_dataset_csv(const std::vector<DatasetRow>& rows, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write dataset file: " + path.string());
  out << kDatasetCsvHeader << "\n";
  for (const DatasetRow& row : rows) {
    out << format_double(row.r_o) << ',' << format_double(row.kappa1) << ','
        << format_double(row.kappa2) << ',' << row.rank << ',' << format_double(row.score)
        << "\n";
  }
}

std::vector<DatasetRow> load_dataset_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open dataset file: " + path.string());
  std::string line;
  if (!std::getline(in, line) || line != kDatasetCsvHeader) {
    throw ConfigError("dataset file " + path.string() + ": unexpected header");
  }
  std::vector<DatasetRow> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto cols = split_csv_line(line);
    if (cols.size() != 5) throw ConfigError("dataset file " + path.string() + ": malformed row");
    DatasetRow row;
    row.r_o = parse_double(cols[0]);
    row.kappa1 = parse_double(cols[1]);
    row.kappa2 = parse_double(cols[2]);
    row.rank = static_cast<int>(parse_double(cols[3]));
    row.score = parse_double(cols[4]);
    rows.push_back(row);
  }
  return rows;
}

GridSpec grid_from_json(const nlohmann::json& j) {
  if (!j.contains("grid")) throw ConfigError("config needs a 'grid' block");
  const auto& g = j.at("grid");
  GridSpec spec;
  try {
    spec.r_o_values = g.at("r_o_values").get<std::vector<double>>();
    spec.kappa_values = g.at("kappa_values").get<std::vector<double>>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("bad 'grid' block: ") + e.what());
  }
  spec.validate();
  return spec;
}

GuidedConfig guided_from_json(const nlohmann::json& j) {
  GuidedConfig cfg;
  if (!j.contains("guided")) return cfg;  // all defaults
  const auto& g = j.at("guided");
  try {
    cfg.gamma = g.value("gamma", cfg.gamma);
    cfg.i_limit = g.value("i_limit", cfg.i_limit);
    cfg.j_limit = g.value("j_limit", cfg.j_limit);
    cfg.kappa2_cap_ratio = g.value("kappa2_cap_ratio", cfg.kappa2_cap_ratio);
    cfg.kappa_start = g.value("kappa_start", cfg.kappa_start);
    cfg.budget = g.value("budget", cfg.budget);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("bad 'guided' block: ") + e.what());
  }
  cfg.validate();
  return cfg;
}

}  // namespace cbfsim
