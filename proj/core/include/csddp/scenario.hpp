#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Dense>

namespace csddp {

/// Uniform date grid t_i = i * horizon / steps, i = 0..steps.
struct TimeGrid {
  double horizon = 1.0;
  std::size_t steps = 52;

  TimeGrid() = default;
  TimeGrid(double horizon_years, std::size_t step_count);

  double dt() const { return horizon / static_cast<double>(steps); }
  double time(std::size_t i) const { return static_cast<double>(i) * dt(); }
  std::size_t dates() const { return steps + 1; }
};

/// 50 + 10 sin(4 pi i / N).
double forward_curve(std::size_t i, std::size_t steps);

/// 22000 + 7000 sin(4 pi i / N), scaled by `scale`.
double mean_demand_curve(std::size_t i, std::size_t steps, double scale = 1.0);

/// One-factor HJM forward model dF(T,t)/F(T,t) = sigma e^{-alpha (T-t)} dW_t.
/// The spot S_t = F(t,t) is driven by the OU factor dZ = -alpha Z dt + dW, Z_0 = 0,
/// which is stepped exactly.
class OneFactorPriceModel {
 public:
  OneFactorPriceModel(double sigma, double alpha, TimeGrid grid, std::vector<double> initial_curve);

  /// Paper forward curve on `grid`.
  static OneFactorPriceModel with_sinusoidal_curve(double sigma, double alpha, TimeGrid grid);

  double sigma() const { return sigma_; }
  double alpha() const { return alpha_; }
  const TimeGrid& grid() const { return grid_; }
  double initial_forward(std::size_t i) const { return curve_.at(i); }
  const std::vector<double>& initial_curve() const { return curve_; }

  /// F(0,t_i) exp(sigma Z - sigma^2 (1 - e^{-2 alpha t_i}) / (4 alpha)).
  double spot_from_factor(std::size_t i, double factor) const;
  /// Inverse of spot_from_factor; requires sigma > 0.
  double factor_from_spot(std::size_t i, double spot) const;
  /// Exact one-step OU update over dt with standard Gaussian shock.
  double step_factor(double factor, double shock) const;
  /// Innovation scale g with g^2 = (1 - e^{-2 alpha dt}) / (2 alpha).
  double factor_shock_scale() const;
  /// Variance of Z at t_i.
  double factor_variance(std::size_t i) const;

 private:
  double sigma_;
  double alpha_;
  TimeGrid grid_;
  std::vector<double> curve_;
};

/// AR(1) deviations around a mean curve: D_{i+1} - m_{i+1} = kappa (D_i - m_i) + sigma_d eps_i.
class AR1DemandModel {
 public:
  AR1DemandModel(double kappa, double sigma_d, std::vector<double> mean_curve);

  /// Paper mean curve on `grid`, with the mean and sigma_d scaled by `scale`.
  static AR1DemandModel with_sinusoidal_mean(double kappa, double sigma_d, const TimeGrid& grid,
                                             double scale = 1.0);

  double kappa() const { return kappa_; }
  double sigma() const { return sigma_d_; }
  double mean(std::size_t i) const { return mean_.at(i); }
  const std::vector<double>& mean_curve() const { return mean_; }

  double step(std::size_t i, double demand, double innovation) const;

 private:
  double kappa_;
  double sigma_d_;
  std::vector<double> mean_;
};

/// Markov state xi = (spot?, demand?), price component first when present.
/// Components are independent.
class MarkovProcessModel {
 public:
  MarkovProcessModel(TimeGrid grid, std::optional<OneFactorPriceModel> price,
                     std::optional<AR1DemandModel> demand);

  const TimeGrid& grid() const { return grid_; }
  std::size_t dimension() const;
  const std::optional<OneFactorPriceModel>& price() const { return price_; }
  const std::optional<AR1DemandModel>& demand() const { return demand_; }
  std::optional<std::size_t> price_index() const;
  std::optional<std::size_t> demand_index() const;

  /// Deterministic xi at date 0.
  std::vector<double> initial_state() const;

  /// xi_{i+1} = f(xi_i, eta_i) with eta a vector of standard Gaussians, one per component.
  void transition(std::size_t i, std::span<const double> state, std::span<const double> innovation,
                  std::span<double> next) const;

  /// eta such that transition(i, state, eta) == next (components with zero noise give 0).
  void innovation_between(std::size_t i, std::span<const double> state, std::span<const double> next,
                          std::span<double> innovation) const;

 private:
  TimeGrid grid_;
  std::optional<OneFactorPriceModel> price_;
  std::optional<AR1DemandModel> demand_;
};

/// S sampled paths of xi over all dates of a grid, stored sample-major.
class ScenarioSet {
 public:
  ScenarioSet() = default;
  ScenarioSet(std::size_t samples, std::size_t dates, std::size_t dimension, std::uint64_t seed);

  std::size_t samples() const { return samples_; }
  std::size_t dates() const { return dates_; }
  std::size_t dimension() const { return dimension_; }
  std::uint64_t seed() const { return seed_; }

  double& at(std::size_t s, std::size_t i, std::size_t k) { return values_[index(s, i, k)]; }
  double at(std::size_t s, std::size_t i, std::size_t k) const { return values_[index(s, i, k)]; }
  std::span<const double> state(std::size_t s, std::size_t i) const {
    return {values_.data() + index(s, i, 0), dimension_};
  }
  std::span<double> state(std::size_t s, std::size_t i) { return {values_.data() + index(s, i, 0), dimension_}; }

  /// All samples at date i as an S x m matrix.
  Eigen::MatrixXd date_points(std::size_t i) const;

  const std::vector<double>& values() const { return values_; }
  std::vector<double>& values() { return values_; }

 private:
  std::size_t index(std::size_t s, std::size_t i, std::size_t k) const {
    return (s * dates_ + i) * dimension_ + k;
  }

  std::size_t samples_ = 0;
  std::size_t dates_ = 0;
  std::size_t dimension_ = 0;
  std::uint64_t seed_ = 0;
  std::vector<double> values_;
};

/// Gaussian innovation used for path s, transition i -> i+1, component k.
double scenario_innovation(std::uint64_t seed, std::size_t s, std::size_t i, std::size_t k);

/// Simulates `samples` paths. Path s depends only on (model, seed, s).
ScenarioSet simulate(const MarkovProcessModel& model, std::size_t samples, std::uint64_t seed,
                     std::size_t threads = 0);

/// Binary format: "SDDPSCN1", u64 S, u64 dates, u64 m, u64 seed, then f64 values, little-endian.
void save_scenarios(const ScenarioSet& set, const std::filesystem::path& path);
ScenarioSet load_scenarios(const std::filesystem::path& path,
                           std::optional<std::size_t> expected_dimension = std::nullopt);

/// One row per (sample, date): sample,date,xi0,...
void export_scenarios_csv(const ScenarioSet& set, const std::filesystem::path& path);

}  // namespace csddp
