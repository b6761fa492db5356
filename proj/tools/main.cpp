// csddp: scenario generation, SDDP runs, DP baseline and run comparison.
#include <cstdint>
#include <exception>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include <CLI11.hpp>
#include <spdlog/spdlog.h>

#include "commands.hpp"
#include "csddp/errors.hpp"
#include "csddp/parallel.hpp"
#include "run_config.hpp"

using namespace csddp;
using namespace csddp::cli;

int main(int argc, char** argv) {
  CLI::App app{"csddp: conditional-cut SDDP for storage valuation"};
  app.require_subcommand(1);

  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> threads;
  std::string out_dir;
  std::string log_level = "warn";

  auto add_common = [&](CLI::App* cmd, bool with_config) {
    if (with_config) cmd->add_option("--config", config_path, "key=value config file")->check(CLI::ExistingFile);
    cmd->add_option("--seed", seed, "override engine.seed");
    cmd->add_option("--threads", threads, "worker threads (0 = all cores, env CSDDP_THREADS)");
    cmd->add_option("--out", out_dir, "output directory");
    cmd->add_option("--log", log_level, "trace, debug, info, warn, error or off");
  };

  auto* gen = app.add_subcommand("gen", "simulate and save the backward scenario set");
  auto* sddp = app.add_subcommand("sddp", "run SDDP and write iterations.csv, cuts.bin and summary.txt");
  auto* dp = app.add_subcommand("dp", "regression DP baseline for the single market storage");
  auto* compare = app.add_subcommand("compare", "compare the summaries of two runs");
  auto* report = app.add_subcommand("report", "print a run summary and its convergence table");
  for (auto* cmd : {gen, sddp, dp}) add_common(cmd, true);

  std::string run_a, run_b, run_dir;
  compare->add_option("run_a", run_a, "run directory or summary file")->required();
  compare->add_option("run_b", run_b, "run directory or summary file")->required();
  compare->add_option("--out", out_dir, "directory for comparison.csv");
  report->add_option("run", run_dir, "run directory or summary file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kUsage;
  }

  try {
    spdlog::set_level(spdlog::level::from_str(log_level));
    if (*compare) return cmd_compare(run_a, run_b, out_dir.empty() ? std::filesystem::path(".") : std::filesystem::path(out_dir), std::cout);
    if (*report) return cmd_report(run_dir, std::cout);

    std::istringstream defaults;
    RunConfig config = config_path.empty() ? parse_config(defaults) : load_config(config_path);
    if (seed) config.seed = *seed;
    if (threads) config.engine.threads = *threads;
    if (!out_dir.empty()) config.out_dir = out_dir;
    if (config.engine.threads) set_default_threads(config.engine.threads);
    config.validate();

    if (*gen) return cmd_gen(config, std::cout);
    if (*sddp) return cmd_sddp(config, std::cout);
    if (*dp) return cmd_dp(config, std::cout);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kRuntime;
  }
  return kUsage;
}
