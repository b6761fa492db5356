#pragma once

#include <filesystem>
#include <iosfwd>

#include "run_config.hpp"

namespace csddp::cli {

enum ExitCode : int { kConverged = 0, kUsage = 1, kNotConverged = 2, kRuntime = 3 };

/// Writes <out>/scenarios.bin (and scenarios.csv when requested).
int cmd_gen(const RunConfig& config, std::ostream& out);

/// Writes <out>/iterations.csv, cuts.bin, config.ini and summary.txt.
int cmd_sddp(const RunConfig& config, std::ostream& out);

/// Regression DP on the market experiment; writes <out>/dp_table.csv and summary.txt.
int cmd_dp(const RunConfig& config, std::ostream& out);

/// Accepts run directories or summary files; writes <out_dir>/comparison.csv.
int cmd_compare(const std::filesystem::path& a, const std::filesystem::path& b, const std::filesystem::path& out_dir,
                std::ostream& out);

/// Prints the summary of a run directory and an ASCII convergence table.
int cmd_report(const std::filesystem::path& run, std::ostream& out);

}  // namespace csddp::cli
