#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "csddp/engine.hpp"
#include "csddp/model.hpp"
#include "csddp/scenario.hpp"

namespace csddp::cli {

enum class Experiment { market, demand, combined };

const char* to_string(Experiment experiment);

/// Everything a command needs, read from a flat key=value file with
/// [model], [engine] and [output] sections. Defaults are the storage experiments' constants.
struct RunConfig {
  // [model]
  Experiment experiment = Experiment::market;
  std::size_t copies = 1;
  ModelMode mode = ModelMode::conditional;
  double horizon = 1.0;
  std::size_t steps = 52;
  double sigma = 0.94;
  double alpha = 0.29;
  /// Replaces the sinusoidal forward curve when non-empty (steps + 1 values).
  std::vector<double> curve;
  StorageParams storage;
  double kappa = 0.9;
  double sigma_d = 1000.0;
  double injection_cost = 0.1;
  /// Demand mean and noise multiplier; defaults to the copy count.
  std::optional<double> demand_scale;

  // [engine]
  std::uint64_t seed = 1;
  std::optional<std::uint64_t> scenario_seed;
  std::size_t samples = 10000;
  std::filesystem::path scenario_file;
  SddpConfig engine;
  bool splits_set = false;
  std::size_t dp_meshes = 6;
  double dp_step = 15000.0;
  std::size_t dp_eval_samples = 100000;

  // [output]
  std::filesystem::path out_dir = "out";
  bool timing = true;
  bool scenario_csv = false;

  void validate() const;
  std::uint64_t effective_scenario_seed() const { return scenario_seed.value_or(seed); }
  double effective_demand_scale() const { return demand_scale.value_or(static_cast<double>(copies)); }
};

/// Parses the config text; unknown sections or keys raise ConfigError naming the line.
RunConfig parse_config(std::istream& in, const std::string& source = "<config>");
RunConfig load_config(const std::filesystem::path& path);

/// Writes every key with its current value, in a form parse_config reads back.
void write_config(const RunConfig& config, std::ostream& out);

TimeGrid make_grid(const RunConfig& config);
MarkovProcessModel make_uncertainty(const RunConfig& config);
OneFactorPriceModel make_price(const RunConfig& config);
ModelInstance make_model(const RunConfig& config);

/// Flat ordered key=value block.
class Summary {
 public:
  void set(const std::string& key, const std::string& value);
  void set(const std::string& key, double value);
  void set(const std::string& key, std::uint64_t value);

  const std::string& get(const std::string& key) const;
  double number(const std::string& key) const;
  bool has(const std::string& key) const;
  const std::vector<std::pair<std::string, std::string>>& entries() const { return entries_; }

  void write(std::ostream& out) const;
  void save(const std::filesystem::path& path) const;
  static Summary load(const std::filesystem::path& path);

 private:
  std::vector<std::pair<std::string, std::string>> entries_;
};

/// Round-trip text for a double.
std::string format_double(double value);

}  // namespace csddp::cli
