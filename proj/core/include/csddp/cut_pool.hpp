#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "csddp/partition.hpp"

namespace csddp {

struct CutOrigin {
  std::uint64_t iteration = 0;
  std::uint64_t trial = 0;
};

/// Cuts on the cost-to-go after each decision stage, local to the cells of that
/// stage's partition of the Markov state.
///
/// A cut on stage t, cell l is  r >= alpha(xi) + beta(xi)' x  where alpha and every
/// component of beta are affine in xi. Its coefficients are stored as a
/// (1 + state_dim) x (1 + xi_dim) row-major block: row 0 holds alpha, row 1 + k
/// holds beta_k; column 0 is the constant term, column 1 + j the xi_j coefficient.
class CutPool {
 public:
  CutPool() = default;
  /// Writes the 1 + xi_dim intercept coefficients of the seed cut of (stage, cell).
  using SeedFn = std::function<void(std::size_t stage, std::size_t cell, std::span<double> intercept)>;

  /// One partition per stage with cuts; every cell is seeded with a cut of zero state slope.
  CutPool(std::vector<std::shared_ptr<const Partition>> partitions, std::size_t state_dim, std::size_t xi_dim,
          const SeedFn& seed);
  /// Seeds every cell of stage t with the constant cut r >= trivial_bounds[t].
  CutPool(std::vector<std::shared_ptr<const Partition>> partitions, std::size_t state_dim, std::size_t xi_dim,
          const std::vector<double>& trivial_bounds);

  std::size_t stages() const { return partitions_.size(); }
  std::size_t state_dim() const { return state_dim_; }
  std::size_t xi_dim() const { return xi_dim_; }
  std::size_t block_size() const { return (1 + state_dim_) * (1 + xi_dim_); }

  const Partition& partition(std::size_t stage) const { return *partitions_.at(stage); }
  std::shared_ptr<const Partition> partition_ptr(std::size_t stage) const { return partitions_.at(stage); }

  std::size_t cut_count(std::size_t stage, std::size_t cell) const;
  std::size_t stage_cut_count(std::size_t stage) const;
  std::size_t total_cuts() const;

  std::span<const double> coefficients(std::size_t stage, std::size_t cell) const;
  std::span<const double> cut(std::size_t stage, std::size_t cell, std::size_t j) const;
  const std::vector<CutOrigin>& origins(std::size_t stage, std::size_t cell) const;

  void add(std::size_t stage, std::size_t cell, std::span<const double> block, CutOrigin origin);

  /// Cut intercepts a_j = alpha_j(xi) and slopes b_j = beta_j(xi), one row per cut.
  void evaluate(std::size_t stage, std::size_t cell, std::span<const double> xi, Eigen::VectorXd& intercepts,
                Eigen::MatrixXd& slopes) const;

  /// max_j alpha_j(xi) + beta_j(xi)' x over the cuts of the cell containing xi.
  double value(std::size_t stage, std::span<const double> xi, std::span<const double> x) const;

  /// Same, restricted to one cell.
  double value_in_cell(std::size_t stage, std::size_t cell, std::span<const double> xi,
                       std::span<const double> x) const;

 private:
  struct Cell {
    std::vector<double> coefficients;
    std::vector<CutOrigin> origins;
  };

  std::vector<std::shared_ptr<const Partition>> partitions_;
  std::size_t state_dim_ = 0;
  std::size_t xi_dim_ = 0;
  std::vector<std::vector<Cell>> cells_;

  friend void save_cuts(const CutPool& pool, const std::filesystem::path& path);
  friend CutPool load_cuts(const std::filesystem::path& path);
};

/// Evaluates one coefficient block at (xi, x).
double evaluate_cut(std::span<const double> block, std::size_t state_dim, std::span<const double> xi,
                    std::span<const double> x);

inline constexpr std::uint64_t kCutFileVersion = 1;

/// Binary format: "SDDPCUT1", u64 version, u64 stages, u64 state_dim, u64 xi_dim, then per stage
/// the partition (splits, breakpoints) and per cell u64 count, count blocks of f64, count origins.
void save_cuts(const CutPool& pool, const std::filesystem::path& path);
CutPool load_cuts(const std::filesystem::path& path);

}  // namespace csddp
