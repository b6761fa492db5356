#include "csddp/dp_oracle.hpp"

#include <array>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <string>

#include "csddp/errors.hpp"
#include "csddp/parallel.hpp"

namespace csddp {

namespace {

bool divides(double step, double value) {
  const double q = value / step;
  return std::abs(q - std::round(q)) < 1e-9;
}

/// Candidate moves {-a_out, 0, a_in} clipped to [-C, C_max - C].
std::array<double, 3> candidates(const StorageParams& s, double stock) {
  return {std::max(-s.max_withdrawal, -stock), 0.0, std::min(s.max_injection, s.capacity - stock)};
}

}  // namespace

StockGrid::StockGrid(const StorageParams& storage, double grid_step) : step(grid_step) {
  storage.validate();
  if (!(step > 0.0)) throw ConfigError("stock grid: step must be > 0");
  if (!divides(step, storage.max_injection) || !divides(step, storage.max_withdrawal) ||
      !divides(step, storage.capacity))
    throw ConfigError("stock grid: step " + std::to_string(step) + " must divide the capacity and both rates");
  if (!divides(step, storage.initial_fill * storage.capacity))
    throw ConfigError("stock grid: initial stock is not on the grid");
  const auto n = static_cast<std::size_t>(std::llround(storage.capacity / step));
  for (std::size_t k = 0; k <= n; ++k) levels.push_back(static_cast<double>(k) * step);
}

std::size_t StockGrid::index_of(double stock) const {
  const auto k = std::llround(stock / step);
  if (k < 0 || static_cast<std::size_t>(k) >= levels.size() || std::abs(stock - levels[static_cast<std::size_t>(k)]) > 1e-6 * step)
    throw ConfigError("stock grid: value " + std::to_string(stock) + " is off the grid");
  return static_cast<std::size_t>(k);
}

DpTable::DpTable(StorageParams storage, StockGrid grid, std::vector<std::vector<LocalAffineModel>> continuation)
    : storage_(storage), grid_(std::move(grid)), continuation_(std::move(continuation)) {}

double DpTable::continuation(std::size_t i, std::size_t level, double spot) const {
  if (i >= continuation_.size()) return 0.0;
  return continuation_[i][level].evaluate(std::span<const double>(&spot, 1));
}

double DpTable::decide(std::size_t i, double stock, double spot) const {
  double best_x = 0.0;
  double best = -std::numeric_limits<double>::infinity();
  for (double x : candidates(storage_, stock)) {
    const double v = -spot * x + continuation(i, grid_.index_of(stock + x), spot);
    if (v > best || (v == best && std::abs(x) < std::abs(best_x))) {
      best = v;
      best_x = x;
    }
  }
  return best_x;
}

DpResult dp_optimize(const OneFactorPriceModel& price, const StorageParams& storage, const StockGrid& grid,
                     const ScenarioSet& scenarios, std::size_t meshes, std::size_t threads) {
  if (meshes < 1) throw ConfigError("dp: meshes must be >= 1");
  if (scenarios.dimension() != 1) throw ConfigError("dp: scenarios must carry the spot price only");
  const std::size_t N = price.grid().steps;
  if (scenarios.dates() < N) throw ConfigError("dp: scenario set is shorter than the horizon");
  const std::size_t S = scenarios.samples();
  const auto L = static_cast<Eigen::Index>(grid.size());

  // next(s, level): realized value from date i+1 on, given stock `level` after the date-i decision.
  Eigen::MatrixXd next = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(S), L);
  Eigen::MatrixXd current(static_cast<Eigen::Index>(S), L);
  std::vector<std::vector<LocalAffineModel>> continuation(N > 0 ? N - 1 : 0);

  for (std::size_t i = N; i-- > 0;) {
    const Eigen::MatrixXd points = scenarios.date_points(i);
    std::vector<LocalAffineModel>* fitted = nullptr;
    if (i + 1 < N) {
      auto part = i == 0 ? std::make_shared<const Partition>(Partition::single_cell(1, S))
                         : std::make_shared<const Partition>(Partition::build(points, {meshes}));
      const RegressionMode mode = i == 0 ? RegressionMode::constant : RegressionMode::affine;
      continuation[i] = fit_columns(part, points, next, mode);
      fitted = &continuation[i];
    }
    parallel_for(S, threads, [&](std::size_t begin, std::size_t end, std::size_t) {
      for (std::size_t s = begin; s < end; ++s) {
        const double spot = points(static_cast<Eigen::Index>(s), 0);
        const std::size_t cell = fitted ? (*fitted)[0].partition().sample_cells()[s] : 0;
        for (Eigen::Index l = 0; l < L; ++l) {
          const double stock = grid.levels[static_cast<std::size_t>(l)];
          double best = -std::numeric_limits<double>::infinity();
          for (double x : candidates(storage, stock)) {
            const auto k = static_cast<std::size_t>(std::llround((stock + x) / grid.step));
            const double cont = fitted ? (*fitted)[k].evaluate_in_cell(cell, std::span<const double>(&spot, 1)) : 0.0;
            best = std::max(best, -spot * x + cont);
          }
          current(static_cast<Eigen::Index>(s), l) = best;
        }
      }
    });
    std::swap(next, current);
  }

  DpResult result;
  const std::size_t c0 = grid.index_of(storage.initial_fill * storage.capacity);
  result.value = S > 0 ? next.col(static_cast<Eigen::Index>(c0)).mean() : 0.0;
  result.table = std::make_shared<DpTable>(storage, grid, std::move(continuation));
  return result;
}

DpSimulation dp_simulate(const DpTable& table, const ScenarioSet& paths, std::size_t threads) {
  if (paths.dimension() != 1) throw ConfigError("dp: paths must carry the spot price only");
  const std::size_t N = table.stages();
  if (paths.dates() < N) throw ConfigError("dp: paths are shorter than the horizon");
  const std::size_t S = paths.samples();
  std::vector<double> gains(S, 0.0);
  parallel_for(S, threads, [&](std::size_t begin, std::size_t end, std::size_t) {
    for (std::size_t s = begin; s < end; ++s) {
      double stock = table.storage().initial_fill * table.storage().capacity;
      double gain = 0.0;
      for (std::size_t i = 0; i < N; ++i) {
        const double spot = paths.at(s, i, 0);
        const double x = table.decide(i, stock, spot);
        gain -= spot * x;
        stock += x;
      }
      gains[s] = gain;
    }
  });
  DpSimulation out;
  if (S == 0) return out;
  double sum = 0.0;
  for (double g : gains) sum += g;
  out.mean = sum / static_cast<double>(S);
  if (S > 1) {
    double ss = 0.0;
    for (double g : gains) ss += (g - out.mean) * (g - out.mean);
    out.std = std::sqrt(ss / static_cast<double>(S - 1));
  }
  return out;
}

void write_dp_table_csv(const DpTable& table, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << "stage,level,cell,intercept,slope\n" << std::setprecision(17);
  for (std::size_t i = 0; i + 1 < table.stages(); ++i) {
    for (std::size_t l = 0; l < table.grid().size(); ++l) {
      const LocalAffineModel& m = table.model(i, l);
      for (Eigen::Index c = 0; c < m.coefficients().rows(); ++c) {
        const double slope = m.coefficients().cols() > 1 ? m.coefficients()(c, 1) : 0.0;
        out << i << ',' << table.grid().levels[l] << ',' << c << ',' << m.coefficients()(c, 0) << ',' << slope << '\n';
      }
    }
  }
  if (!out) throw IoError("failed writing " + path.string());
}

}  // namespace csddp
