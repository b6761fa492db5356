#include "run_config.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <istream>
#include <ostream>
#include <sstream>
#include <unordered_map>

#include "csddp/errors.hpp"

namespace csddp::cli {

namespace {

std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return std::string(s.substr(first, last - first + 1));
}

double parse_double(const std::string& text, const std::string& where) {
  double value = 0.0;
  const auto* end = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(text.data(), end, value);
  if (ec != std::errc{} || ptr != end || !std::isfinite(value))
    throw ConfigError(where + ": expected a number, got '" + text + "'");
  return value;
}

std::uint64_t parse_u64(const std::string& text, const std::string& where) {
  std::uint64_t value = 0;
  const auto* end = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(text.data(), end, value);
  if (ec != std::errc{} || ptr != end) throw ConfigError(where + ": expected a non-negative integer, got '" + text + "'");
  return value;
}

bool parse_bool(const std::string& text, const std::string& where) {
  if (text == "true" || text == "1" || text == "yes") return true;
  if (text == "false" || text == "0" || text == "no") return false;
  throw ConfigError(where + ": expected true or false, got '" + text + "'");
}

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> items;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) items.push_back(item);
  }
  return items;
}

template <class T>
std::string join(const std::vector<T>& values) {
  std::string out;
  for (std::size_t k = 0; k < values.size(); ++k) {
    if (k) out += ',';
    if constexpr (std::is_floating_point_v<T>)
      out += format_double(values[k]);
    else
      out += std::to_string(values[k]);
  }
  return out;
}

using Setter = std::function<void(RunConfig&, const std::string& value, const std::string& where)>;

const std::unordered_map<std::string, Setter>& setters() {
  static const std::unordered_map<std::string, Setter> table = [] {
    std::unordered_map<std::string, Setter> t;
    auto num = [](double RunConfig::*field) {
      return [field](RunConfig& c, const std::string& v, const std::string& w) { c.*field = parse_double(v, w); };
    };
    auto count = [](std::size_t RunConfig::*field) {
      return [field](RunConfig& c, const std::string& v, const std::string& w) { c.*field = parse_u64(v, w); };
    };
    t["model.experiment"] = [](RunConfig& c, const std::string& v, const std::string& w) {
      if (v == "market")
        c.experiment = Experiment::market;
      else if (v == "demand")
        c.experiment = Experiment::demand;
      else if (v == "combined")
        c.experiment = Experiment::combined;
      else
        throw ConfigError(w + ": experiment must be market, demand or combined");
    };
    t["model.mode"] = [](RunConfig& c, const std::string& v, const std::string& w) {
      if (v == "conditional")
        c.mode = ModelMode::conditional;
      else if (v == "augmented")
        c.mode = ModelMode::augmented;
      else
        throw ConfigError(w + ": mode must be conditional or augmented");
    };
    t["model.copies"] = count(&RunConfig::copies);
    t["model.horizon"] = num(&RunConfig::horizon);
    t["model.steps"] = count(&RunConfig::steps);
    t["model.sigma"] = num(&RunConfig::sigma);
    t["model.alpha"] = num(&RunConfig::alpha);
    t["model.curve"] = [](RunConfig& c, const std::string& v, const std::string& w) {
      c.curve.clear();
      for (const auto& item : split_list(v)) c.curve.push_back(parse_double(item, w));
    };
    t["model.capacity"] = [](RunConfig& c, const std::string& v, const std::string& w) {
      c.storage.capacity = parse_double(v, w);
    };
    t["model.max_injection"] = [](RunConfig& c, const std::string& v, const std::string& w) {
      c.storage.max_injection = parse_double(v, w);
    };
    t["model.max_withdrawal"] = [](RunConfig& c, const std::string& v, const std::string& w) {
      c.storage.max_withdrawal = parse_double(v, w);
    };
    t["model.initial_fill"] = [](RunConfig& c, const std::string& v, const std::string& w) {
      c.storage.initial_fill = parse_double(v, w);
    };
    t["model.kappa"] = num(&RunConfig::kappa);
    t["model.sigma_d"] = num(&RunConfig::sigma_d);
    t["model.injection_cost"] = num(&RunConfig::injection_cost);
    t["model.demand_scale"] = [](RunConfig& c, const std::string& v, const std::string& w) {
      c.demand_scale = parse_double(v, w);
    };

    t["engine.seed"] = [](RunConfig& c, const std::string& v, const std::string& w) { c.seed = parse_u64(v, w); };
    t["engine.scenario_seed"] = [](RunConfig& c, const std::string& v, const std::string& w) {
      c.scenario_seed = parse_u64(v, w);
    };
    t["engine.samples"] = count(&RunConfig::samples);
    t["engine.scenario_file"] = [](RunConfig& c, const std::string& v, const std::string&) { c.scenario_file = v; };
    t["engine.splits"] = [](RunConfig& c, const std::string& v, const std::string& w) {
      c.engine.splits.clear();
      for (const auto& item : split_list(v)) c.engine.splits.push_back(parse_u64(item, w));
      c.splits_set = true;
    };
    t["engine.forward_count"] = [](RunConfig& c, const std::string& v, const std::string& w) {
      c.engine.forward_count = parse_u64(v, w);
    };
    t["engine.eval_period"] = [](RunConfig& c, const std::string& v, const std::string& w) {
      c.engine.eval_period = parse_u64(v, w);
    };
    t["engine.eval_samples"] = [](RunConfig& c, const std::string& v, const std::string& w) {
      c.engine.eval_samples = parse_u64(v, w);
    };
    t["engine.rel_gap"] = [](RunConfig& c, const std::string& v, const std::string& w) {
      c.engine.rel_gap = parse_double(v, w);
    };
    t["engine.max_iterations"] = [](RunConfig& c, const std::string& v, const std::string& w) {
      c.engine.max_iterations = parse_u64(v, w);
    };
    t["engine.confidence"] = [](RunConfig& c, const std::string& v, const std::string& w) {
      c.engine.confidence = parse_double(v, w);
    };
    t["engine.inner_samples"] = [](RunConfig& c, const std::string& v, const std::string& w) {
      c.engine.inner_samples = parse_u64(v, w);
    };
    t["engine.regression"] = [](RunConfig& c, const std::string& v, const std::string& w) {
      if (v == "affine")
        c.engine.regression = RegressionMode::affine;
      else if (v == "constant")
        c.engine.regression = RegressionMode::constant;
      else
        throw ConfigError(w + ": regression must be affine or constant");
    };
    t["engine.threads"] = [](RunConfig& c, const std::string& v, const std::string& w) {
      c.engine.threads = parse_u64(v, w);
    };
    t["engine.dp_meshes"] = count(&RunConfig::dp_meshes);
    t["engine.dp_step"] = num(&RunConfig::dp_step);
    t["engine.dp_eval_samples"] = count(&RunConfig::dp_eval_samples);

    t["output.dir"] = [](RunConfig& c, const std::string& v, const std::string&) { c.out_dir = v; };
    t["output.timing"] = [](RunConfig& c, const std::string& v, const std::string& w) {
      c.timing = parse_bool(v, w);
    };
    t["output.scenario_csv"] = [](RunConfig& c, const std::string& v, const std::string& w) {
      c.scenario_csv = parse_bool(v, w);
    };
    return t;
  }();
  return table;
}

std::vector<std::size_t> default_splits(Experiment experiment) {
  switch (experiment) {
    case Experiment::market: return {10};
    case Experiment::demand: return {8};
    case Experiment::combined: return {8, 4};
  }
  return {};
}

}  // namespace

const char* to_string(Experiment experiment) {
  switch (experiment) {
    case Experiment::market: return "market";
    case Experiment::demand: return "demand";
    case Experiment::combined: return "combined";
  }
  return "?";
}

std::string format_double(double value) {
  char buf[32];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, value);
  return std::string(buf, ptr);
}

void RunConfig::validate() const {
  if (copies < 1) throw ConfigError("model.copies must be >= 1");
  if (steps < 1) throw ConfigError("model.steps must be >= 1");
  if (!(horizon > 0.0)) throw ConfigError("model.horizon must be > 0");
  if (!curve.empty() && curve.size() != steps + 1)
    throw ConfigError("model.curve needs steps + 1 = " + std::to_string(steps + 1) + " values");
  if (mode == ModelMode::augmented && experiment != Experiment::demand)
    throw ConfigError("augmented mode is only available for the demand experiment");
  if (samples < 1) throw ConfigError("engine.samples must be >= 1");
  if (!(injection_cost >= 0.0)) throw ConfigError("model.injection_cost must be >= 0");
  if (demand_scale && !(*demand_scale > 0.0)) throw ConfigError("model.demand_scale must be > 0");
  storage.validate();
}

RunConfig parse_config(std::istream& in, const std::string& source) {
  RunConfig config;
  std::string section;
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    const std::string where = source + ":" + std::to_string(number);
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    const std::string text = trim(line);
    if (text.empty()) continue;
    if (text.front() == '[') {
      if (text.back() != ']') throw ConfigError(where + ": malformed section header");
      section = trim(std::string_view(text).substr(1, text.size() - 2));
      if (section != "model" && section != "engine" && section != "output")
        throw ConfigError(where + ": unknown section [" + section + "]");
      continue;
    }
    const auto eq = text.find('=');
    if (eq == std::string::npos) throw ConfigError(where + ": expected key = value");
    if (section.empty()) throw ConfigError(where + ": key outside of a section");
    const std::string key = section + "." + trim(std::string_view(text).substr(0, eq));
    const std::string value = trim(std::string_view(text).substr(eq + 1));
    const auto it = setters().find(key);
    if (it == setters().end()) throw ConfigError(where + ": unknown key " + key);
    it->second(config, value, where + " (" + key + ")");
  }
  if (!config.splits_set) config.engine.splits = default_splits(config.experiment);
  if (config.mode == ModelMode::augmented && !config.splits_set) config.engine.splits.clear();
  return config;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config " + path.string());
  return parse_config(in, path.string());
}

void write_config(const RunConfig& c, std::ostream& out) {
  out << "[model]\n";
  out << "experiment = " << to_string(c.experiment) << "\n";
  out << "copies = " << c.copies << "\n";
  out << "mode = " << to_string(c.mode) << "\n";
  out << "horizon = " << format_double(c.horizon) << "\n";
  out << "steps = " << c.steps << "\n";
  out << "sigma = " << format_double(c.sigma) << "\n";
  out << "alpha = " << format_double(c.alpha) << "\n";
  if (!c.curve.empty()) out << "curve = " << join(c.curve) << "\n";
  out << "capacity = " << format_double(c.storage.capacity) << "\n";
  out << "max_injection = " << format_double(c.storage.max_injection) << "\n";
  out << "max_withdrawal = " << format_double(c.storage.max_withdrawal) << "\n";
  out << "initial_fill = " << format_double(c.storage.initial_fill) << "\n";
  out << "kappa = " << format_double(c.kappa) << "\n";
  out << "sigma_d = " << format_double(c.sigma_d) << "\n";
  out << "injection_cost = " << format_double(c.injection_cost) << "\n";
  out << "demand_scale = " << format_double(c.effective_demand_scale()) << "\n";
  out << "\n[engine]\n";
  out << "seed = " << c.seed << "\n";
  out << "scenario_seed = " << c.effective_scenario_seed() << "\n";
  out << "samples = " << c.samples << "\n";
  if (!c.scenario_file.empty()) out << "scenario_file = " << c.scenario_file.string() << "\n";
  out << "splits = " << join(c.engine.splits) << "\n";
  out << "forward_count = " << c.engine.forward_count << "\n";
  out << "eval_period = " << c.engine.eval_period << "\n";
  out << "eval_samples = " << c.engine.eval_samples << "\n";
  out << "rel_gap = " << format_double(c.engine.rel_gap) << "\n";
  out << "max_iterations = " << c.engine.max_iterations << "\n";
  out << "confidence = " << format_double(c.engine.confidence) << "\n";
  out << "inner_samples = " << c.engine.inner_samples << "\n";
  out << "regression = " << (c.engine.regression == RegressionMode::affine ? "affine" : "constant") << "\n";
  out << "dp_meshes = " << c.dp_meshes << "\n";
  out << "dp_step = " << format_double(c.dp_step) << "\n";
  out << "dp_eval_samples = " << c.dp_eval_samples << "\n";
  out << "\n[output]\n";
  out << "dir = " << c.out_dir.string() << "\n";
  out << "timing = " << (c.timing ? "true" : "false") << "\n";
  out << "scenario_csv = " << (c.scenario_csv ? "true" : "false") << "\n";
}

TimeGrid make_grid(const RunConfig& config) { return TimeGrid(config.horizon, config.steps); }

OneFactorPriceModel make_price(const RunConfig& config) {
  const TimeGrid grid = make_grid(config);
  if (!config.curve.empty()) return OneFactorPriceModel(config.sigma, config.alpha, grid, config.curve);
  return OneFactorPriceModel::with_sinusoidal_curve(config.sigma, config.alpha, grid);
}

namespace {

AR1DemandModel make_demand(const RunConfig& config) {
  return AR1DemandModel::with_sinusoidal_mean(config.kappa, config.sigma_d, make_grid(config),
                                              config.effective_demand_scale());
}

std::vector<double> price_curve(const RunConfig& config) {
  if (!config.curve.empty()) return config.curve;
  std::vector<double> curve(config.steps + 1);
  for (std::size_t i = 0; i < curve.size(); ++i) curve[i] = forward_curve(i, config.steps);
  return curve;
}

}  // namespace

MarkovProcessModel make_uncertainty(const RunConfig& config) { return make_model(config).uncertainty; }

ModelInstance make_model(const RunConfig& config) {
  config.validate();
  switch (config.experiment) {
    case Experiment::market: return build_market_storage(config.storage, make_price(config), config.copies);
    case Experiment::demand:
      return build_demand_storage(config.storage, config.injection_cost, make_demand(config), price_curve(config),
                                  make_grid(config), config.copies, config.mode);
    case Experiment::combined:
      return build_combined_storage(config.storage, config.injection_cost, make_price(config), make_demand(config),
                                    config.copies, config.mode);
  }
  throw ConfigError("unknown experiment");
}

void Summary::set(const std::string& key, const std::string& value) {
  for (auto& [k, v] : entries_)
    if (k == key) {
      v = value;
      return;
    }
  entries_.emplace_back(key, value);
}

void Summary::set(const std::string& key, double value) { set(key, format_double(value)); }

void Summary::set(const std::string& key, std::uint64_t value) { set(key, std::to_string(value)); }

bool Summary::has(const std::string& key) const {
  for (const auto& [k, v] : entries_)
    if (k == key) return true;
  return false;
}

const std::string& Summary::get(const std::string& key) const {
  for (const auto& [k, v] : entries_)
    if (k == key) return v;
  throw SchemaError("summary has no key " + key);
}

double Summary::number(const std::string& key) const { return parse_double(get(key), "summary key " + key); }

void Summary::write(std::ostream& out) const {
  for (const auto& [k, v] : entries_) out << k << '=' << v << '\n';
}

void Summary::save(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  write(out);
  if (!out) throw IoError("write failed for " + path.string());
}

Summary Summary::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open summary " + path.string());
  Summary summary;
  std::string line;
  while (std::getline(in, line)) {
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw SchemaError(path.string() + ": malformed summary line '" + line + "'");
    summary.set(line.substr(0, eq), line.substr(eq + 1));
  }
  return summary;
}

}  // namespace csddp::cli
