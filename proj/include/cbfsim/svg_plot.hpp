#pragma once

#include <filesystem>

#include "cbfsim/cbf_filter.hpp"
#include "cbfsim/sim_engine.hpp"

namespace cbfsim {

/// Renders one run as a standalone three-panel SVG: the end-effector path
/// in the world x-y and x-z planes (actual solid, desired dashed, obstacle
/// and clearance circles), and h(t) against its zero line. Deterministic:
/// identical runs render byte-identical files.
void write_run_plot(const RunResult& result, const Obstacle& obstacle,
                    const ClearanceSpec& clearance, const std::filesystem::path& path);

}  // namespace cbfsim
