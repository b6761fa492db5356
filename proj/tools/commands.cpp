#include "commands.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "csddp/cut_pool.hpp"
#include "csddp/dp_oracle.hpp"
#include "csddp/engine.hpp"
#include "csddp/errors.hpp"
#include "csddp/parallel.hpp"
#include "csddp/random.hpp"
#include "csddp/scenario.hpp"

namespace csddp::cli {

namespace {

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

void prepare_dir(const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
}

ScenarioSet backward_scenarios(const RunConfig& config, const ModelInstance& model, std::ostream& out) {
  if (!config.scenario_file.empty()) {
    ScenarioSet set = load_scenarios(config.scenario_file, model.uncertainty.dimension());
    if (set.dates() != config.steps + 1)
      throw SchemaError(config.scenario_file.string() + ": scenario dates " + std::to_string(set.dates()) +
                        " do not match steps + 1 = " + std::to_string(config.steps + 1));
    out << "loaded " << set.samples() << " scenarios from " << config.scenario_file.string() << "\n";
    return set;
  }
  return simulate(model.uncertainty, config.samples, config.effective_scenario_seed(), config.engine.threads);
}

void header(Summary& s, const RunConfig& config, const char* command) {
  s.set("command", std::string(command));
  s.set("experiment", std::string(to_string(config.experiment)));
  s.set("mode", std::string(to_string(config.mode)));
  s.set("copies", static_cast<std::uint64_t>(config.copies));
  s.set("seed", config.seed);
}

void print_summary(const Summary& s, std::ostream& out) {
  out << "[summary]\n";
  s.write(out);
}

std::filesystem::path summary_path(const std::filesystem::path& p) {
  if (std::filesystem::is_directory(p)) return p / "summary.txt";
  return p;
}

struct CsvTable {
  std::vector<std::string> columns;
  std::vector<std::vector<std::string>> rows;
};

CsvTable read_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  CsvTable table;
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (line.back() == ',') cells.emplace_back();
    if (first)
      table.columns = std::move(cells);
    else
      table.rows.push_back(std::move(cells));
    first = false;
  }
  return table;
}

}  // namespace

int cmd_gen(const RunConfig& config, std::ostream& out) {
  const ModelInstance model = make_model(config);
  prepare_dir(config.out_dir);
  const ScenarioSet set =
      simulate(model.uncertainty, config.samples, config.effective_scenario_seed(), config.engine.threads);
  const auto file = config.out_dir / "scenarios.bin";
  save_scenarios(set, file);
  if (config.scenario_csv) export_scenarios_csv(set, config.out_dir / "scenarios.csv");

  Summary s;
  header(s, config, "gen");
  s.set("samples", static_cast<std::uint64_t>(set.samples()));
  s.set("steps", static_cast<std::uint64_t>(config.steps));
  s.set("dates", static_cast<std::uint64_t>(set.dates()));
  s.set("dimension", static_cast<std::uint64_t>(set.dimension()));
  s.set("scenario_seed", set.seed());
  s.set("file", file.string());
  print_summary(s, out);
  return kConverged;
}

int cmd_sddp(const RunConfig& config, std::ostream& out) {
  const auto start = std::chrono::steady_clock::now();
  const ModelInstance model = make_model(config);
  SddpConfig engine = config.engine;
  engine.seed = config.seed;
  engine.validate(model);
  prepare_dir(config.out_dir);
  const ScenarioSet scenarios = backward_scenarios(config, model, out);

  const RunResult result = run(model, scenarios, engine);
  const RunReport& r = result.report;

  write_iteration_csv(r, config.out_dir / "iterations.csv", config.timing);
  save_cuts(result.pool, config.out_dir / "cuts.bin");
  {
    std::ofstream cfg(config.out_dir / "config.ini");
    write_config(config, cfg);
  }

  Summary s;
  header(s, config, "sddp");
  s.set("samples", static_cast<std::uint64_t>(scenarios.samples()));
  s.set("splits", [&] {
    std::string t;
    for (std::size_t k = 0; k < engine.splits.size(); ++k) t += (k ? "," : "") + std::to_string(engine.splits[k]);
    return t.empty() ? std::string("1") : t;
  }());
  s.set("forward_paths", static_cast<std::uint64_t>(engine.forward_paths()));
  if (config.mode == ModelMode::augmented) s.set("inner_samples", static_cast<std::uint64_t>(engine.inner_samples));
  s.set("status", std::string(to_string(r.status)));
  s.set("iterations", static_cast<std::uint64_t>(r.iterations.size()));
  s.set("z_lower", r.z_lower);
  s.set("eval_mean", r.eval_mean);
  s.set("eval_std", r.eval_std);
  s.set("eval_samples", static_cast<std::uint64_t>(engine.eval_samples));
  s.set("gap_rel", r.gap_rel);
  s.set("gap_conf", r.gap_conf);
  s.set("value_per_copy", r.eval_mean / static_cast<double>(config.copies));
  s.set("cuts_total", static_cast<std::uint64_t>(result.pool.total_cuts()));
  s.set("constant_fallbacks", static_cast<std::uint64_t>(r.constant_fallbacks));
  s.set("overshoot_warnings", static_cast<std::uint64_t>(r.overshoot_warnings));
  s.set("monotone", std::string(r.monotone ? "true" : "false"));
  if (config.timing) s.set("wall_s", seconds_since(start));
  s.save(config.out_dir / "summary.txt");
  print_summary(s, out);
  return r.status == RunStatus::converged ? kConverged : kNotConverged;
}

int cmd_dp(const RunConfig& config, std::ostream& out) {
  const auto start = std::chrono::steady_clock::now();
  if (config.experiment != Experiment::market) throw ConfigError("dp: only the market experiment is supported");
  if (config.copies != 1) throw ConfigError("dp: requires copies = 1");
  const ModelInstance model = make_model(config);
  const OneFactorPriceModel price = make_price(config);
  const StockGrid grid(config.storage, config.dp_step);
  prepare_dir(config.out_dir);
  const ScenarioSet scenarios = backward_scenarios(config, model, out);

  const DpResult opt = dp_optimize(price, config.storage, grid, scenarios, config.dp_meshes, config.engine.threads);
  const ScenarioSet fresh =
      simulate(model.uncertainty, config.dp_eval_samples, derive_seed(config.seed, 4, 0), config.engine.threads);
  const DpSimulation sim = dp_simulate(*opt.table, fresh, config.engine.threads);
  write_dp_table_csv(*opt.table, config.out_dir / "dp_table.csv");

  Summary s;
  header(s, config, "dp");
  s.set("samples", static_cast<std::uint64_t>(scenarios.samples()));
  s.set("meshes", static_cast<std::uint64_t>(config.dp_meshes));
  s.set("grid_levels", static_cast<std::uint64_t>(grid.size()));
  s.set("dp_value", opt.value);
  s.set("sim_mean", sim.mean);
  s.set("sim_std", sim.std);
  s.set("sim_samples", static_cast<std::uint64_t>(fresh.samples()));
  if (config.timing) s.set("wall_s", seconds_since(start));
  s.save(config.out_dir / "summary.txt");
  print_summary(s, out);
  return kConverged;
}

int cmd_compare(const std::filesystem::path& a, const std::filesystem::path& b, const std::filesystem::path& out_dir,
                std::ostream& out) {
  const auto pa = summary_path(a);
  const auto pb = summary_path(b);
  for (const auto& p : {pa, pb})
    if (!std::filesystem::exists(p)) throw IoError("compare: missing run artifact " + p.string());
  const Summary sa = Summary::load(pa);
  const Summary sb = Summary::load(pb);

  auto value = [](const Summary& s) { return s.has("eval_mean") ? s.number("eval_mean") : s.number("dp_value"); };
  const double va = value(sa);
  const double vb = value(sb);
  const double rel = va == vb ? 0.0 : std::abs(va - vb) / std::max(std::abs(va), std::abs(vb));

  prepare_dir(out_dir);
  const auto file = out_dir / "comparison.csv";
  std::ofstream csv(file);
  if (!csv) throw IoError("cannot write " + file.string());
  const std::vector<std::string> keys = {"experiment", "mode",    "status",  "iterations",
                                         "z_lower",    "eval_mean", "eval_std", "gap_rel",
                                         "wall_s"};
  csv << "run,source";
  for (const auto& k : keys) csv << ',' << k;
  csv << '\n';
  auto row = [&](const char* name, const Summary& s, const std::filesystem::path& p) {
    csv << name << ',' << p.string();
    for (const auto& k : keys) csv << ',' << (s.has(k) ? s.get(k) : std::string());
    csv << '\n';
  };
  row("A", sa, pa);
  row("B", sb, pb);
  csv << "rel_diff,";
  for (const auto& k : keys) csv << ',' << (k == "eval_mean" ? format_double(rel) : std::string());
  csv << '\n';
  if (!csv) throw IoError("failed writing " + file.string());

  Summary s;
  s.set("command", std::string("compare"));
  s.set("value_a", va);
  s.set("value_b", vb);
  s.set("rel_diff", rel);
  s.set("file", file.string());
  print_summary(s, out);
  return kConverged;
}

int cmd_report(const std::filesystem::path& run, std::ostream& out) {
  const Summary s = Summary::load(summary_path(run));
  print_summary(s, out);
  const auto iter_file = run / "iterations.csv";
  if (!std::filesystem::is_directory(run) || !std::filesystem::exists(iter_file)) return kConverged;

  const CsvTable table = read_csv(iter_file);
  auto col = [&](const char* name) -> std::size_t {
    for (std::size_t k = 0; k < table.columns.size(); ++k)
      if (table.columns[k] == name) return k;
    throw SchemaError(iter_file.string() + ": missing column " + name);
  };
  const std::size_t c_it = col("iteration"), c_z = col("z_lower"), c_e = col("eval_mean"), c_g = col("gap_rel");
  out << "\n iteration        z_lower      eval_mean      gap_rel\n";
  char line[128];
  for (const auto& row : table.rows) {
    if (row.size() <= c_g || row[c_e].empty()) continue;
    std::snprintf(line, sizeof line, "%10s %14.6e %14.6e %12.3e\n", row[c_it].c_str(), std::stod(row[c_z]),
                  std::stod(row[c_e]), std::stod(row[c_g]));
    out << line;
  }
  return kConverged;
}

}  // namespace csddp::cli
