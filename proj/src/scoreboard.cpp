#include "cbfsim/scoreboard.hpp"

#include <cmath>
#include <fstream>
#include <limits>

#include "cbfsim/csv_io.hpp"
#include "cbfsim/errors.hpp"

namespace cbfsim {

namespace {

double ratio(double min_v, double v) {
  // v == 0 can only happen when v itself is the minimum.
  return v > 0.0 ? min_v / v : 1.0;
}

}  // namespace

void ScoreBoard::rescore() {
  ctrl_min = std::numeric_limits<double>::quiet_NaN();
  tsep_min = std::numeric_limits<double>::quiet_NaN();
  for (const RunEntry& run : runs) {
    if (!run.good_run) continue;
    if (std::isnan(ctrl_min) || run.run_ctrl < ctrl_min) ctrl_min = run.run_ctrl;
    if (std::isnan(tsep_min) || run.run_tsep < tsep_min) tsep_min = run.run_tsep;
  }
  for (RunEntry& run : runs) {
    if (!run.good_run || std::isnan(ctrl_min)) {
      run.score = 0.0;
    } else {
      run.score = 0.5 * ratio(ctrl_min, run.run_ctrl) + 0.5 * ratio(tsep_min, run.run_tsep);
    }
  }
}

bool ScoreBoard::has_good_run() const {
  for (const RunEntry& run : runs) {
    if (run.good_run) return true;
  }
  return false;
}

const char* const kResultsCsvHeader =
    "r_o,kappa1,kappa2,min_h,run_ctrl,run_tsep,final_err,good_run,score";

std::string format_run_entry_csv(const RunEntry& run) {
  std::string row;
  row += format_double(run.r_o);
  row += ',';
  row += format_double(run.kappa1);
  row += ',';
  row += format_double(run.kappa2);
  row += ',';
  row += format_double(run.min_h);
  row += ',';
  row += format_double(run.run_ctrl);
  row += ',';
  row += format_double(run.run_tsep);
  row += ',';
  row += format_double(run.final_err);
  row += ',';
  row += run.good_run ? '1' : '0';
  row += ',';
  row += format_double(run.score);
  return row;
}

void save_scoreboard_csv(const ScoreBoard& board, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write results file: " + path.string());
  out << kResultsCsvHeader << "\n";
  for (const RunEntry& run : board.runs) {
    out << format_run_entry_csv(run) << "\n";
  }
}

ScoreBoard load_scoreboard_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open results file: " + path.string());
  std::string line;
  if (!std::getline(in, line) || line != kResultsCsvHeader) {
    throw ConfigError("results file " + path.string() + ": unexpected header");
  }
  ScoreBoard board;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto cols = split_csv_line(line);
    if (cols.size() != 9) {
      throw ConfigError("results file " + path.string() + ": malformed row");
    }
    RunEntry run;
    run.r_o = parse_double(cols[0]);
    run.kappa1 = parse_double(cols[1]);
    run.kappa2 = parse_double(cols[2]);
    run.min_h = parse_double(cols[3]);
    run.run_ctrl = parse_double(cols[4]);
    run.run_tsep = parse_double(cols[5]);
    run.final_err = parse_double(cols[6]);
    run.good_run = cols[7] == "1";
    run.score = parse_double(cols[8]);
    board.runs.push_back(run);
  }
  board.rescore();
  return board;
}

}  // namespace cbfsim
