#pragma once

#include <filesystem>
#include <functional>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "cbfsim/scenario.hpp"
#include "cbfsim/scoreboard.hpp"

namespace cbfsim {

/// Exhaustive-search lattice: every (r_o, kappa1, kappa2) combination with
/// both gains drawn from the same value list.
struct GridSpec {
  std::vector<double> r_o_values;   // m
  std::vector<double> kappa_values; // shared by kappa1 and kappa2

  void validate() const;  // nonempty, strictly increasing, positive
};

/// Guided-search tuning knobs. The walk starts at
/// (kappa_start, kappa_start) and moves in steps of gamma.
struct GuidedConfig {
  double gamma = 2.0;            // s1 = s2 = gamma
  int i_limit = 3;               // consecutive decreasing scores closing a kappa1 scope
  int j_limit = 3;               // consecutive decreasing scores ending the search
  double kappa2_cap_ratio = 1.3; // scope closes once kappa2 >= ratio * kappa1
  double kappa_start = 1.0;
  int budget = 200;              // hard evaluation cap per radius

  void validate() const;
};

/// One training-set row: a top-ranked gain pair for an obstacle radius.
struct DatasetRow {
  double r_o = 0.0;
  double kappa1 = 0.0;
  double kappa2 = 0.0;
  int rank = 0;  // 1 = best for this radius
  double score = 0.0;
};

/// Scores one (r_o, kappa1, kappa2) choice; the simulation-backed evaluator
/// is the production path, tests substitute synthetic landscapes.
using RunEvaluator = std::function<RunEntry(double r_o, const CbfParams& params)>;

/// Evaluator that clones the base scenario with the given radius and gains,
/// simulates it metrics-only, and folds a safe-start violation into a
/// faulted entry instead of throwing.
RunEvaluator make_sim_evaluator(const Scenario& base);

/// Runs every grid combination (r_o outer, kappa1, then kappa2 innermost)
/// and returns the fully rescored board. Combinations already present in
/// `resume` are kept, not re-run. `on_run` (optional) observes each fresh
/// entry in deterministic submission order, scored against the minima known
/// at that point; individual run faults are recorded and the sweep
/// continues.
ScoreBoard grid_search(const GridSpec& grid, const RunEvaluator& evaluate, int workers,
                       const ScoreBoard* resume = nullptr,
                       const std::function<void(const RunEntry&)>& on_run = {});

struct GuidedResult {
  CbfParams best;           // from the final rescored board; ties -> smaller kappa1, then kappa2
  double best_score = 0.0;  // 0 when no good run was found
  bool found_good = false;
  ScoreBoard board;
  int evals = 0;      // fresh simulations only (resumed rows excluded)
  bool truncated = false;  // stopped by the budget cap, not the j-condition
};

/// Hill-climbing parameter walk for a single radius:
///   - improvement over the best recorded score -> kappa2 += gamma
///   - i_limit consecutive decreasing scores within the current kappa1
///     scope, or kappa2 >= cap_ratio * kappa1 -> kappa1 += gamma, kappa2
///     restarts at kappa_start
///   - j_limit consecutive decreasing scores spanning kappa1 scopes ->
///     terminate
///   - otherwise kappa2 += gamma
/// A pair with kappa2 >= cap_ratio * kappa1 + gamma is never evaluated
/// (the scope closes instead). After every run the whole board is rescored;
/// the decision rule uses each run's score as of its own rescore. With
/// `resume`, the stored rows replay through the same decision machine
/// (validating they match) before any new evaluation.
GuidedResult guided_search(const GuidedConfig& config, double r_o, const RunEvaluator& evaluate,
                           const ScoreBoard* resume = nullptr,
                           const std::function<void(const RunEntry&)>& on_run = {});

/// Top-k good runs per radius by descending score (ties: smaller kappa1,
/// then smaller kappa2), radii in ascending order, rank starting at 1.
/// Radii without good runs contribute no rows.
std::vector<DatasetRow> export_dataset(const ScoreBoard& board, int k);

extern const char* const kDatasetCsvHeader;  // r_o,kappa1,kappa2,rank,score

void save_dataset_csv(const std::vector<DatasetRow>& rows, const std::filesystem::path& path);
std::vector<DatasetRow> load_dataset_csv(const std::filesystem::path& path);

GridSpec grid_from_json(const nlohmann::json& j);
GuidedConfig guided_from_json(const nlohmann::json& j);

}  // namespace cbfsim
