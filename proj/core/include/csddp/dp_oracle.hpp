#pragma once

#include <cstddef>
#include <filesystem>
#include <memory>
#include <vector>

#include "csddp/model.hpp"
#include "csddp/partition.hpp"
#include "csddp/scenario.hpp"

namespace csddp {

/// Stock levels 0, step, ..., capacity. The step must divide both rates and the capacity.
struct StockGrid {
  double step = 15000.0;
  std::vector<double> levels;

  StockGrid() = default;
  StockGrid(const StorageParams& storage, double step);

  std::size_t size() const { return levels.size(); }
  /// Index of an on-grid stock value.
  std::size_t index_of(double stock) const;
};

/// Regression DP for one storage facility trading at spot, with controls
/// {-a_out, 0, a_in} clipped to the stock bounds. Values are gains (positive).
class DpTable {
 public:
  DpTable(StorageParams storage, StockGrid grid, std::vector<std::vector<LocalAffineModel>> continuation);

  const StorageParams& storage() const { return storage_; }
  const StockGrid& grid() const { return grid_; }
  /// Decision dates covered (continuation after the last one is zero).
  std::size_t stages() const { return continuation_.size() + 1; }

  /// Estimated expected gain from date i+1 on, given stock after the date-i decision and spot S_i.
  double continuation(std::size_t i, std::size_t level, double spot) const;
  const LocalAffineModel& model(std::size_t i, std::size_t level) const { return continuation_.at(i).at(level); }

  /// Best control at date i for the given stock and spot, ties resolved to the smallest move.
  double decide(std::size_t i, double stock, double spot) const;

 private:
  StorageParams storage_;
  StockGrid grid_;
  std::vector<std::vector<LocalAffineModel>> continuation_;
};

struct DpResult {
  double value = 0.0;
  std::shared_ptr<DpTable> table;
};

/// Backward regression DP over the decision dates of `price.grid()` using `scenarios`
/// for the conditional expectations (one mesh of `meshes` cells per date).
DpResult dp_optimize(const OneFactorPriceModel& price, const StorageParams& storage, const StockGrid& grid,
                     const ScenarioSet& scenarios, std::size_t meshes, std::size_t threads = 0);

struct DpSimulation {
  double mean = 0.0;
  double std = 0.0;
};

/// Greedy policy against the table on (fresh) paths; mean realized gain.
DpSimulation dp_simulate(const DpTable& table, const ScenarioSet& paths, std::size_t threads = 0);

/// stage,level,cell,intercept,slope
void write_dp_table_csv(const DpTable& table, const std::filesystem::path& path);

}  // namespace csddp
