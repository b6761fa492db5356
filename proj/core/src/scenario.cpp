#include "csddp/scenario.hpp"

#include <cmath>
#include <fstream>
#include <numbers>
#include <string>

#include <spdlog/spdlog.h>

#include "binary_io.hpp"
#include "csddp/errors.hpp"
#include "csddp/parallel.hpp"
#include "csddp/random.hpp"

namespace csddp {

namespace {
constexpr std::string_view kScenarioMagic = "SDDPSCN1";
}

TimeGrid::TimeGrid(double horizon_years, std::size_t step_count) : horizon(horizon_years), steps(step_count) {
  if (!(horizon_years > 0.0) || step_count < 1) throw ConfigError("TimeGrid: need horizon > 0 and steps >= 1");
}

double forward_curve(std::size_t i, std::size_t steps) {
  return 50.0 + 10.0 * std::sin(4.0 * std::numbers::pi * static_cast<double>(i) / static_cast<double>(steps));
}

double mean_demand_curve(std::size_t i, std::size_t steps, double scale) {
  return scale *
         (22000.0 + 7000.0 * std::sin(4.0 * std::numbers::pi * static_cast<double>(i) / static_cast<double>(steps)));
}

// ---------------------------------------------------------------------------
// OneFactorPriceModel

OneFactorPriceModel::OneFactorPriceModel(double sigma, double alpha, TimeGrid grid, std::vector<double> initial_curve)
    : sigma_(sigma), alpha_(alpha), grid_(grid), curve_(std::move(initial_curve)) {
  if (!(sigma_ >= 0.0)) throw ConfigError("price model: sigma must be >= 0");
  if (!(alpha_ > 0.0)) throw ConfigError("price model: alpha must be > 0");
  if (curve_.size() != grid_.dates())
    throw ConfigError("price model: initial curve needs " + std::to_string(grid_.dates()) + " values, got " +
                      std::to_string(curve_.size()));
  for (double f : curve_)
    if (!(f > 0.0) || !std::isfinite(f)) throw ConfigError("price model: initial curve must be positive");
}

OneFactorPriceModel OneFactorPriceModel::with_sinusoidal_curve(double sigma, double alpha, TimeGrid grid) {
  std::vector<double> curve(grid.dates());
  for (std::size_t i = 0; i < curve.size(); ++i) curve[i] = forward_curve(i, grid.steps);
  return {sigma, alpha, grid, std::move(curve)};
}

double OneFactorPriceModel::factor_variance(std::size_t i) const {
  return -std::expm1(-2.0 * alpha_ * grid_.time(i)) / (2.0 * alpha_);
}

double OneFactorPriceModel::spot_from_factor(std::size_t i, double factor) const {
  return curve_.at(i) * std::exp(sigma_ * factor - 0.5 * sigma_ * sigma_ * factor_variance(i));
}

double OneFactorPriceModel::factor_from_spot(std::size_t i, double spot) const {
  return (std::log(spot / curve_.at(i)) + 0.5 * sigma_ * sigma_ * factor_variance(i)) / sigma_;
}

double OneFactorPriceModel::factor_shock_scale() const {
  return std::sqrt(-std::expm1(-2.0 * alpha_ * grid_.dt()) / (2.0 * alpha_));
}

double OneFactorPriceModel::step_factor(double factor, double shock) const {
  return std::exp(-alpha_ * grid_.dt()) * factor + factor_shock_scale() * shock;
}

// ---------------------------------------------------------------------------
// AR1DemandModel

AR1DemandModel::AR1DemandModel(double kappa, double sigma_d, std::vector<double> mean_curve)
    : kappa_(kappa), sigma_d_(sigma_d), mean_(std::move(mean_curve)) {
  if (!(kappa_ >= 0.0 && kappa_ < 1.0)) throw ConfigError("demand model: kappa must lie in [0, 1)");
  if (!(sigma_d_ >= 0.0)) throw ConfigError("demand model: sigma_d must be >= 0");
  if (mean_.empty()) throw ConfigError("demand model: empty mean curve");
}

AR1DemandModel AR1DemandModel::with_sinusoidal_mean(double kappa, double sigma_d, const TimeGrid& grid, double scale) {
  std::vector<double> mean(grid.dates());
  for (std::size_t i = 0; i < mean.size(); ++i) mean[i] = mean_demand_curve(i, grid.steps, scale);
  return {kappa, sigma_d * scale, std::move(mean)};
}

double AR1DemandModel::step(std::size_t i, double demand, double innovation) const {
  return mean_.at(i + 1) + kappa_ * (demand - mean_.at(i)) + sigma_d_ * innovation;
}

// ---------------------------------------------------------------------------
// MarkovProcessModel

MarkovProcessModel::MarkovProcessModel(TimeGrid grid, std::optional<OneFactorPriceModel> price,
                                       std::optional<AR1DemandModel> demand)
    : grid_(grid), price_(std::move(price)), demand_(std::move(demand)) {
  if (!price_ && !demand_) throw ConfigError("Markov model needs at least one component");
  if (price_ && price_->initial_curve().size() != grid_.dates())
    throw ConfigError("Markov model: price curve length does not match grid");
  if (demand_ && demand_->mean_curve().size() != grid_.dates())
    throw ConfigError("Markov model: demand mean curve length does not match grid");
}

std::size_t MarkovProcessModel::dimension() const { return (price_ ? 1 : 0) + (demand_ ? 1 : 0); }

std::optional<std::size_t> MarkovProcessModel::price_index() const {
  return price_ ? std::optional<std::size_t>(0) : std::nullopt;
}

std::optional<std::size_t> MarkovProcessModel::demand_index() const {
  if (!demand_) return std::nullopt;
  return price_ ? 1 : 0;
}

std::vector<double> MarkovProcessModel::initial_state() const {
  std::vector<double> xi;
  if (price_) xi.push_back(price_->initial_forward(0));
  if (demand_) xi.push_back(demand_->mean(0));
  return xi;
}

void MarkovProcessModel::transition(std::size_t i, std::span<const double> state, std::span<const double> innovation,
                                    std::span<double> next) const {
  std::size_t k = 0;
  if (price_) {
    const double z = price_->sigma() > 0.0 ? price_->factor_from_spot(i, state[k]) : 0.0;
    next[k] = price_->spot_from_factor(i + 1, price_->step_factor(z, innovation[k]));
    ++k;
  }
  if (demand_) next[k] = demand_->step(i, state[k], innovation[k]);
}

void MarkovProcessModel::innovation_between(std::size_t i, std::span<const double> state,
                                            std::span<const double> next, std::span<double> innovation) const {
  std::size_t k = 0;
  if (price_) {
    if (price_->sigma() > 0.0) {
      const double z0 = price_->factor_from_spot(i, state[k]);
      const double z1 = price_->factor_from_spot(i + 1, next[k]);
      innovation[k] = (z1 - std::exp(-price_->alpha() * grid_.dt()) * z0) / price_->factor_shock_scale();
    } else {
      innovation[k] = 0.0;
    }
    ++k;
  }
  if (demand_) {
    const double drift = demand_->step(i, state[k], 0.0);
    innovation[k] = demand_->sigma() > 0.0 ? (next[k] - drift) / demand_->sigma() : 0.0;
  }
}

// ---------------------------------------------------------------------------
// ScenarioSet

ScenarioSet::ScenarioSet(std::size_t samples, std::size_t dates, std::size_t dimension, std::uint64_t seed)
    : samples_(samples), dates_(dates), dimension_(dimension), seed_(seed), values_(samples * dates * dimension) {}

Eigen::MatrixXd ScenarioSet::date_points(std::size_t i) const {
  Eigen::MatrixXd pts(samples_, dimension_);
  for (std::size_t s = 0; s < samples_; ++s)
    for (std::size_t k = 0; k < dimension_; ++k) pts(s, k) = at(s, i, k);
  return pts;
}

double scenario_innovation(std::uint64_t seed, std::size_t s, std::size_t i, std::size_t k) {
  return keyed_normal(seed, s, i, k);
}

ScenarioSet simulate(const MarkovProcessModel& model, std::size_t samples, std::uint64_t seed, std::size_t threads) {
  if (samples < 1) throw ConfigError("simulate: samples must be >= 1");
  const auto& grid = model.grid();
  ScenarioSet set(samples, grid.dates(), model.dimension(), seed);
  const auto xi0 = model.initial_state();
  const auto& price = model.price();
  const auto& demand = model.demand();
  const std::size_t demand_k = model.demand_index().value_or(0);

  std::vector<std::size_t> negative(resolve_threads(threads), 0);
  parallel_for(samples, threads, [&](std::size_t begin, std::size_t end, std::size_t worker) {
    for (std::size_t s = begin; s < end; ++s) {
      for (std::size_t k = 0; k < xi0.size(); ++k) set.at(s, 0, k) = xi0[k];
      double z = 0.0;
      double d = demand ? demand->mean(0) : 0.0;
      for (std::size_t i = 0; i + 1 < grid.dates(); ++i) {
        if (price) {
          z = price->step_factor(z, scenario_innovation(seed, s, i, 0));
          set.at(s, i + 1, 0) = price->spot_from_factor(i + 1, z);
        }
        if (demand) {
          d = demand->step(i, d, scenario_innovation(seed, s, i, demand_k));
          set.at(s, i + 1, demand_k) = d;
          if (d < 0.0) ++negative[worker];
        }
      }
    }
  });
  std::size_t total_negative = 0;
  for (auto n : negative) total_negative += n;
  if (total_negative > 0)
    spdlog::warn("simulate: {} sampled demand values are negative (no truncation applied)", total_negative);
  return set;
}

// ---------------------------------------------------------------------------
// I/O

void save_scenarios(const ScenarioSet& set, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open scenario file for writing: " + path.string());
  out.write(kScenarioMagic.data(), static_cast<std::streamsize>(kScenarioMagic.size()));
  detail::write_u64(out, set.samples());
  detail::write_u64(out, set.dates());
  detail::write_u64(out, set.dimension());
  detail::write_u64(out, set.seed());
  detail::write_f64s(out, set.values());
  if (!out) throw IoError("failed writing scenario file: " + path.string());
}

ScenarioSet load_scenarios(const std::filesystem::path& path, std::optional<std::size_t> expected_dimension) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open scenario file: " + path.string());
  detail::Reader reader(in, "scenario file " + path.string());
  reader.magic(kScenarioMagic);
  const auto samples = reader.u64("sample count");
  const auto dates = reader.u64("date count");
  const auto dimension = reader.u64("dimension");
  const auto seed = reader.u64("seed");
  if (expected_dimension && dimension != *expected_dimension)
    throw SchemaError("scenario file " + path.string() + ": expected dimension " +
                      std::to_string(*expected_dimension) + ", found " + std::to_string(dimension));
  if (samples == 0 || dates == 0 || dimension == 0)
    throw SchemaError("scenario file " + path.string() + ": zero-sized header");
  ScenarioSet set(samples, dates, dimension, seed);
  reader.f64s(set.values(), "payload");
  reader.expect_end();
  return set;
}

void export_scenarios_csv(const ScenarioSet& set, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open csv for writing: " + path.string());
  out << "sample,date";
  for (std::size_t k = 0; k < set.dimension(); ++k) out << ",xi" << k;
  out << '\n';
  out.precision(17);
  for (std::size_t s = 0; s < set.samples(); ++s)
    for (std::size_t i = 0; i < set.dates(); ++i) {
      out << s << ',' << i;
      for (std::size_t k = 0; k < set.dimension(); ++k) out << ',' << set.at(s, i, k);
      out << '\n';
    }
}

}  // namespace csddp
