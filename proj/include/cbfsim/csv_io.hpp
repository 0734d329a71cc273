#pragma once

#include <cstdio>
#include <string>
#include <vector>

namespace cbfsim {

/// Shortest round-trip decimal form of a double; stable across runs so that
/// re-generated result files are byte-identical.
std::string format_double(double v);

/// Splits one CSV line on commas (no quoting; our files never need it).
std::vector<std::string> split_csv_line(const std::string& line);

double parse_double(const std::string& s);

}  // namespace cbfsim
