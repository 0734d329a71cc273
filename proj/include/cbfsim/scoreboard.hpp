#pragma once

#include <filesystem>
#include <limits>
#include <string>
#include <vector>

namespace cbfsim {

/// Summary of one simulated run under a (r_o, kappa1, kappa2) choice.
struct RunEntry {
  double r_o = 0.0;
  double kappa1 = 0.0;
  double kappa2 = 0.0;
  double min_h = 0.0;
  double run_ctrl = 0.0;   // integral of torque norm, N m s
  double run_tsep = 0.0;   // integral of Cartesian separation, m s
  double final_err = 0.0;  // m
  bool good_run = false;
  double score = 0.0;
  std::string fault;  // kept in memory / progress logs, not in the results CSV
};

/// Population-relative scores: every good run is rated against the smallest
/// control effort and trajectory separation found so far,
///   score = good * (0.5 ctrl_min/run_ctrl + 0.5 tsep_min/run_tsep),
/// so the run achieving both minima scores exactly 1 and failed runs 0.
/// Insertion order is preserved; searches rely on it when resuming.
struct ScoreBoard {
  std::vector<RunEntry> runs;
  // NaN until at least one good run exists.
  double ctrl_min = std::numeric_limits<double>::quiet_NaN();
  double tsep_min = std::numeric_limits<double>::quiet_NaN();

  void add(RunEntry entry) { runs.push_back(std::move(entry)); }

  /// Recomputes the population minima and every run's score.
  void rescore();

  bool has_good_run() const;
};

/// The documented results-CSV columns, in order.
extern const char* const kResultsCsvHeader;

/// One results-CSV row (no newline); shared by the batch writer and the
/// incremental per-run appends so both produce identical bytes.
std::string format_run_entry_csv(const RunEntry& entry);

void save_scoreboard_csv(const ScoreBoard& board, const std::filesystem::path& path);
ScoreBoard load_scoreboard_csv(const std::filesystem::path& path);

}  // namespace cbfsim
