#pragma once

#include <cstddef>
#include <memory>
#include <span>
#include <vector>

#include <Eigen/Dense>

namespace csddp {

/// Adaptive hyperrectangle mesh over a sample cloud.
///
/// Direction 0 is split into splits[0] strips holding near-equal sample counts,
/// each strip is split along direction 1 into splits[1] strips of its own members,
/// and so on. Uneven remainders go to the earliest strips. A breakpoint is the
/// midpoint between the largest value of the lower strip and the smallest of the
/// upper one; a query equal to a breakpoint belongs to the lower strip. Queries
/// outside the sampled box fall into the nearest boundary cell.
///
/// Cells are numbered in mixed radix: cell = ((j0 * I1 + j1) * I2 + j2) ...
class Partition {
 public:
  /// Builds the mesh from an S x m point cloud. Throws ConfigError when S < prod(splits).
  static Partition build(const Eigen::Ref<const Eigen::MatrixXd>& points, std::vector<std::size_t> splits);

  /// Single cell covering everything, for `samples` build points of dimension m.
  static Partition single_cell(std::size_t dimension, std::size_t samples);

  /// Rebuilds a mesh from stored breakpoints (no build-point assignment).
  Partition(std::vector<std::size_t> splits, std::vector<std::vector<double>> breakpoints);

  std::size_t dimension() const { return splits_.size(); }
  const std::vector<std::size_t>& splits() const { return splits_; }
  std::size_t cell_count() const { return cell_count_; }

  /// breakpoints()[k] holds, for every node at level k (prod of splits[0..k-1] nodes),
  /// splits[k]-1 ascending values, node-major.
  const std::vector<std::vector<double>>& breakpoints() const { return breakpoints_; }

  std::size_t locate(std::span<const double> point) const;

  /// Cell of each build point (empty for meshes rebuilt from breakpoints).
  const std::vector<std::size_t>& sample_cells() const { return sample_cells_; }

  /// Build-point indices grouped by cell, ascending within each cell.
  const std::vector<std::vector<std::size_t>>& cell_members() const { return cell_members_; }

 private:
  Partition() = default;
  void build_level(const Eigen::Ref<const Eigen::MatrixXd>& points, std::size_t level, std::size_t node,
                   std::vector<std::size_t> members);

  std::vector<std::size_t> splits_;
  std::size_t cell_count_ = 1;
  std::vector<std::vector<double>> breakpoints_;
  std::vector<std::size_t> sample_cells_;
  std::vector<std::vector<std::size_t>> cell_members_;
};

enum class RegressionMode { affine, constant };

/// Least-squares fit of k responses on [1, x] over n points (n x m regressors).
/// coefficients is k x (1+m): intercept then slopes in raw coordinates.
/// Fits are computed on centred data with a Cholesky solve of the m x m normal matrix.
/// `degenerate` is set when the affine fit was requested but the design was singular
/// (fewer than m+1 points or a coordinate constant over the points); the fit then
/// falls back to per-response means with zero slopes.
struct AffineFit {
  Eigen::MatrixXd coefficients;
  bool degenerate = false;
};

AffineFit fit_affine(const Eigen::Ref<const Eigen::MatrixXd>& points, const Eigen::Ref<const Eigen::MatrixXd>& responses,
                     RegressionMode mode);

enum class CellStatus : unsigned char { fitted, constant_fallback, empty };

/// Piecewise affine (or piecewise constant) conditional-expectation estimator on a Partition.
class LocalAffineModel {
 public:
  LocalAffineModel(std::shared_ptr<const Partition> partition, RegressionMode mode, Eigen::MatrixXd coefficients,
                   std::vector<CellStatus> status);

  const Partition& partition() const { return *partition_; }
  RegressionMode mode() const { return mode_; }
  /// L x (1+m) in affine mode, L x 1 in constant mode.
  const Eigen::MatrixXd& coefficients() const { return coefficients_; }
  const std::vector<CellStatus>& status() const { return status_; }

  double evaluate(std::span<const double> point) const;
  double evaluate_in_cell(std::size_t cell, std::span<const double> point) const;

 private:
  std::shared_ptr<const Partition> partition_;
  RegressionMode mode_;
  Eigen::MatrixXd coefficients_;
  std::vector<CellStatus> status_;
};

/// Fits one model per response column. `points` must be the partition's build points.
std::vector<LocalAffineModel> fit_columns(std::shared_ptr<const Partition> partition,
                                          const Eigen::Ref<const Eigen::MatrixXd>& points,
                                          const Eigen::Ref<const Eigen::MatrixXd>& responses, RegressionMode mode);

LocalAffineModel fit(std::shared_ptr<const Partition> partition, const Eigen::Ref<const Eigen::MatrixXd>& points,
                     const Eigen::Ref<const Eigen::VectorXd>& responses, RegressionMode mode);

}  // namespace csddp
