#include "csddp/partition.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>
#include <string>

#include "csddp/errors.hpp"

namespace csddp {

namespace {

std::size_t product(const std::vector<std::size_t>& v) {
  return std::accumulate(v.begin(), v.end(), std::size_t{1}, std::multiplies<>());
}

std::size_t strip_of(std::span<const double> bps, double value) {
  return static_cast<std::size_t>(std::lower_bound(bps.begin(), bps.end(), value) - bps.begin());
}

}  // namespace

Partition Partition::build(const Eigen::Ref<const Eigen::MatrixXd>& points, std::vector<std::size_t> splits) {
  if (splits.size() != static_cast<std::size_t>(points.cols()))
    throw ConfigError("partition: " + std::to_string(splits.size()) + " split counts for " +
                      std::to_string(points.cols()) + "-dimensional points");
  for (auto s : splits)
    if (s < 1) throw ConfigError("partition: split counts must be >= 1");
  if (!points.allFinite()) throw ConfigError("partition: non-finite build point");

  Partition p;
  p.splits_ = std::move(splits);
  p.cell_count_ = product(p.splits_);
  const auto samples = static_cast<std::size_t>(points.rows());
  if (samples < p.cell_count_)
    throw ConfigError("insufficient samples for partition: " + std::to_string(samples) + " points for " +
                      std::to_string(p.cell_count_) + " cells");

  std::size_t nodes = 1;
  p.breakpoints_.resize(p.splits_.size());
  for (std::size_t k = 0; k < p.splits_.size(); ++k) {
    p.breakpoints_[k].assign(nodes * (p.splits_[k] - 1), std::numeric_limits<double>::infinity());
    nodes *= p.splits_[k];
  }
  p.sample_cells_.assign(samples, 0);
  p.cell_members_.assign(p.cell_count_, {});

  std::vector<std::size_t> all(samples);
  std::iota(all.begin(), all.end(), 0);
  p.build_level(points, 0, 0, std::move(all));
  for (auto& members : p.cell_members_) std::sort(members.begin(), members.end());
  return p;
}

void Partition::build_level(const Eigen::Ref<const Eigen::MatrixXd>& points, std::size_t level, std::size_t node,
                            std::vector<std::size_t> members) {
  if (level == splits_.size()) {
    for (auto idx : members) sample_cells_[idx] = node;
    cell_members_[node] = std::move(members);
    return;
  }
  const std::size_t strips = splits_[level];
  const auto col = static_cast<Eigen::Index>(level);
  std::sort(members.begin(), members.end(), [&](std::size_t a, std::size_t b) {
    const double va = points(static_cast<Eigen::Index>(a), col);
    const double vb = points(static_cast<Eigen::Index>(b), col);
    return va < vb || (va == vb && a < b);
  });

  const std::size_t n = members.size();
  std::span<double> bps(breakpoints_[level].data() + node * (strips - 1), strips - 1);
  const std::size_t base = n / strips;
  const std::size_t extra = n % strips;
  std::size_t pos = 0;
  for (std::size_t j = 0; j + 1 < strips; ++j) {
    pos += base + (j < extra ? 1 : 0);
    if (n == 0 || pos >= n) {
      bps[j] = std::numeric_limits<double>::infinity();
    } else if (pos == 0) {
      bps[j] = -std::numeric_limits<double>::infinity();
    } else {
      const double lo = points(static_cast<Eigen::Index>(members[pos - 1]), col);
      const double hi = points(static_cast<Eigen::Index>(members[pos]), col);
      bps[j] = lo + 0.5 * (hi - lo);
    }
  }

  // Assign by lookup so that build assignments and locate() agree even with tied values.
  std::vector<std::vector<std::size_t>> children(strips);
  for (auto idx : members) children[strip_of(bps, points(static_cast<Eigen::Index>(idx), col))].push_back(idx);
  for (std::size_t j = 0; j < strips; ++j) build_level(points, level + 1, node * strips + j, std::move(children[j]));
}

Partition Partition::single_cell(std::size_t dimension, std::size_t samples) {
  Partition p;
  p.splits_.assign(dimension, 1);
  p.cell_count_ = 1;
  p.breakpoints_.assign(dimension, {});
  p.sample_cells_.assign(samples, 0);
  p.cell_members_.assign(1, {});
  p.cell_members_[0].resize(samples);
  std::iota(p.cell_members_[0].begin(), p.cell_members_[0].end(), 0);
  return p;
}

Partition::Partition(std::vector<std::size_t> splits, std::vector<std::vector<double>> breakpoints)
    : splits_(std::move(splits)), cell_count_(product(splits_)), breakpoints_(std::move(breakpoints)) {
  if (breakpoints_.size() != splits_.size()) throw SchemaError("partition: breakpoint levels do not match dimension");
  std::size_t nodes = 1;
  for (std::size_t k = 0; k < splits_.size(); ++k) {
    if (splits_[k] < 1) throw SchemaError("partition: split count must be >= 1");
    if (breakpoints_[k].size() != nodes * (splits_[k] - 1))
      throw SchemaError("partition: level " + std::to_string(k) + " expects " +
                        std::to_string(nodes * (splits_[k] - 1)) + " breakpoints, found " +
                        std::to_string(breakpoints_[k].size()));
    nodes *= splits_[k];
  }
  cell_members_.assign(cell_count_, {});
}

std::size_t Partition::locate(std::span<const double> point) const {
  std::size_t node = 0;
  for (std::size_t k = 0; k < splits_.size(); ++k) {
    const std::size_t strips = splits_[k];
    std::span<const double> bps(breakpoints_[k].data() + node * (strips - 1), strips - 1);
    node = node * strips + strip_of(bps, point[k]);
  }
  return node;
}

// ---------------------------------------------------------------------------

AffineFit fit_affine(const Eigen::Ref<const Eigen::MatrixXd>& points, const Eigen::Ref<const Eigen::MatrixXd>& responses,
                     RegressionMode mode) {
  const Eigen::Index n = points.rows();
  const Eigen::Index m = points.cols();
  const Eigen::Index k = responses.cols();
  AffineFit out;
  out.coefficients = Eigen::MatrixXd::Zero(k, 1 + m);
  if (n == 0) return out;

  const Eigen::RowVectorXd x_mean = points.colwise().mean();
  const Eigen::RowVectorXd y_mean = responses.colwise().mean();
  out.coefficients.col(0) = y_mean.transpose();
  if (mode == RegressionMode::constant || m == 0) return out;
  if (n < m + 1) {
    out.degenerate = true;
    return out;
  }

  const Eigen::MatrixXd xc = points.rowwise() - x_mean;
  Eigen::MatrixXd normal = xc.transpose() * xc;
  const Eigen::MatrixXd cross = xc.transpose() * (responses.rowwise() - y_mean);

  for (Eigen::Index j = 0; j < m; ++j) {
    const double floor = 1e-13 * static_cast<double>(n) * std::max(x_mean(j) * x_mean(j), 1e-300);
    if (!(normal(j, j) > floor)) {
      out.degenerate = true;
      return out;
    }
  }
  const double max_diag = normal.diagonal().maxCoeff();
  normal.diagonal().array() += 1e-12 * normal.trace() / static_cast<double>(m);
  Eigen::LLT<Eigen::MatrixXd> llt(normal);
  if (llt.info() != Eigen::Success) {
    out.degenerate = true;
    return out;
  }
  const Eigen::VectorXd pivots = Eigen::MatrixXd(llt.matrixL()).diagonal();
  if (pivots.array().square().minCoeff() < 1e-12 * max_diag) {
    out.degenerate = true;
    return out;
  }
  const Eigen::MatrixXd slopes = llt.solve(cross);  // m x k
  out.coefficients.rightCols(m) = slopes.transpose();
  out.coefficients.col(0) = y_mean.transpose() - slopes.transpose() * x_mean.transpose();
  return out;
}

LocalAffineModel::LocalAffineModel(std::shared_ptr<const Partition> partition, RegressionMode mode,
                                   Eigen::MatrixXd coefficients, std::vector<CellStatus> status)
    : partition_(std::move(partition)), mode_(mode), coefficients_(std::move(coefficients)), status_(std::move(status)) {
  const auto cells = static_cast<Eigen::Index>(partition_->cell_count());
  const auto width = mode_ == RegressionMode::affine ? 1 + static_cast<Eigen::Index>(partition_->dimension()) : 1;
  if (coefficients_.rows() != cells || coefficients_.cols() != width)
    throw ConfigError("LocalAffineModel: coefficient table has wrong shape");
}

double LocalAffineModel::evaluate_in_cell(std::size_t cell, std::span<const double> point) const {
  const auto row = static_cast<Eigen::Index>(cell);
  double v = coefficients_(row, 0);
  if (mode_ == RegressionMode::affine)
    for (Eigen::Index j = 1; j < coefficients_.cols(); ++j) v += coefficients_(row, j) * point[j - 1];
  return v;
}

double LocalAffineModel::evaluate(std::span<const double> point) const {
  return evaluate_in_cell(partition_->locate(point), point);
}

std::vector<LocalAffineModel> fit_columns(std::shared_ptr<const Partition> partition,
                                          const Eigen::Ref<const Eigen::MatrixXd>& points,
                                          const Eigen::Ref<const Eigen::MatrixXd>& responses, RegressionMode mode) {
  const auto& cells = partition->sample_cells();
  if (cells.size() != static_cast<std::size_t>(points.rows()) || points.rows() != responses.rows())
    throw ConfigError("fit: regressors must be the partition's build points");
  const auto m = points.cols();
  const auto k = responses.cols();
  const auto L = static_cast<Eigen::Index>(partition->cell_count());
  const auto width = mode == RegressionMode::affine ? 1 + m : 1;

  std::vector<Eigen::MatrixXd> tables(static_cast<std::size_t>(k), Eigen::MatrixXd::Zero(L, width));
  std::vector<CellStatus> status(static_cast<std::size_t>(L), CellStatus::fitted);

  for (Eigen::Index c = 0; c < L; ++c) {
    const auto& members = partition->cell_members()[static_cast<std::size_t>(c)];
    if (members.empty()) {
      status[static_cast<std::size_t>(c)] = CellStatus::empty;
      continue;
    }
    Eigen::MatrixXd x(static_cast<Eigen::Index>(members.size()), m);
    Eigen::MatrixXd y(static_cast<Eigen::Index>(members.size()), k);
    for (std::size_t r = 0; r < members.size(); ++r) {
      x.row(static_cast<Eigen::Index>(r)) = points.row(static_cast<Eigen::Index>(members[r]));
      y.row(static_cast<Eigen::Index>(r)) = responses.row(static_cast<Eigen::Index>(members[r]));
    }
    const AffineFit f = fit_affine(x, y, mode);
    if (f.degenerate) status[static_cast<std::size_t>(c)] = CellStatus::constant_fallback;
    for (Eigen::Index col = 0; col < k; ++col) tables[static_cast<std::size_t>(col)].row(c) = f.coefficients.row(col).head(width);
  }

  std::vector<LocalAffineModel> models;
  models.reserve(static_cast<std::size_t>(k));
  for (auto& t : tables) models.emplace_back(partition, mode, std::move(t), status);
  return models;
}

LocalAffineModel fit(std::shared_ptr<const Partition> partition, const Eigen::Ref<const Eigen::MatrixXd>& points,
                     const Eigen::Ref<const Eigen::VectorXd>& responses, RegressionMode mode) {
  return std::move(fit_columns(std::move(partition), points, responses, mode).front());
}

}  // namespace csddp
