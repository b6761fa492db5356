#include "csddp/cut_pool.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <string>

#include "binary_io.hpp"
#include "csddp/errors.hpp"

namespace csddp {

CutPool::CutPool(std::vector<std::shared_ptr<const Partition>> partitions, std::size_t state_dim,
                 std::size_t xi_dim, const SeedFn& seed)
    : partitions_(std::move(partitions)), state_dim_(state_dim), xi_dim_(xi_dim) {
  cells_.resize(partitions_.size());
  std::vector<double> block(block_size(), 0.0);
  for (std::size_t t = 0; t < partitions_.size(); ++t) {
    if (!partitions_[t]) throw ConfigError("cut pool: missing partition for stage " + std::to_string(t));
    if (partitions_[t]->dimension() != xi_dim_)
      throw ConfigError("cut pool: partition dimension does not match the Markov state");
    cells_[t].resize(partitions_[t]->cell_count());
    for (std::size_t l = 0; l < cells_[t].size(); ++l) {
      std::fill(block.begin(), block.end(), 0.0);
      seed(t, l, std::span<double>(block.data(), 1 + xi_dim_));
      add(t, l, block, CutOrigin{});
    }
  }
}

CutPool::CutPool(std::vector<std::shared_ptr<const Partition>> partitions, std::size_t state_dim,
                 std::size_t xi_dim, const std::vector<double>& trivial_bounds)
    : CutPool(
          [&] {
            if (trivial_bounds.size() != partitions.size())
              throw ConfigError("cut pool: one trivial bound per stage required");
            return std::move(partitions);
          }(),
          state_dim, xi_dim, [&](std::size_t t, std::size_t, std::span<double> c) { c[0] = trivial_bounds[t]; }) {}

std::size_t CutPool::cut_count(std::size_t stage, std::size_t cell) const {
  return cells_.at(stage).at(cell).origins.size();
}

std::size_t CutPool::stage_cut_count(std::size_t stage) const {
  std::size_t n = 0;
  for (const auto& c : cells_.at(stage)) n += c.origins.size();
  return n;
}

std::size_t CutPool::total_cuts() const {
  std::size_t n = 0;
  for (std::size_t t = 0; t < stages(); ++t) n += stage_cut_count(t);
  return n;
}

std::span<const double> CutPool::coefficients(std::size_t stage, std::size_t cell) const {
  return cells_.at(stage).at(cell).coefficients;
}

std::span<const double> CutPool::cut(std::size_t stage, std::size_t cell, std::size_t j) const {
  return coefficients(stage, cell).subspan(j * block_size(), block_size());
}

const std::vector<CutOrigin>& CutPool::origins(std::size_t stage, std::size_t cell) const {
  return cells_.at(stage).at(cell).origins;
}

void CutPool::add(std::size_t stage, std::size_t cell, std::span<const double> block, CutOrigin origin) {
  if (block.size() != block_size()) throw ConfigError("cut pool: coefficient block has the wrong size");
  for (double v : block)
    if (!std::isfinite(v)) throw Error("cut pool: non-finite cut coefficient at stage " + std::to_string(stage));
  auto& c = cells_.at(stage).at(cell);
  c.coefficients.insert(c.coefficients.end(), block.begin(), block.end());
  c.origins.push_back(origin);
}

void CutPool::evaluate(std::size_t stage, std::size_t cell, std::span<const double> xi, Eigen::VectorXd& intercepts,
                       Eigen::MatrixXd& slopes) const {
  const auto& c = cells_.at(stage).at(cell);
  const std::size_t count = c.origins.size();
  const std::size_t w = 1 + xi_dim_;
  intercepts.resize(static_cast<Eigen::Index>(count));
  slopes.resize(static_cast<Eigen::Index>(count), static_cast<Eigen::Index>(state_dim_));
  const double* p = c.coefficients.data();
  for (std::size_t j = 0; j < count; ++j) {
    for (std::size_t r = 0; r <= state_dim_; ++r, p += w) {
      double v = p[0];
      for (std::size_t q = 0; q < xi_dim_; ++q) v += p[1 + q] * xi[q];
      if (r == 0)
        intercepts(static_cast<Eigen::Index>(j)) = v;
      else
        slopes(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(r - 1)) = v;
    }
  }
}

double evaluate_cut(std::span<const double> block, std::size_t state_dim, std::span<const double> xi,
                    std::span<const double> x) {
  const std::size_t w = 1 + xi.size();
  double total = 0.0;
  for (std::size_t r = 0; r <= state_dim; ++r) {
    const double* p = block.data() + r * w;
    double v = p[0];
    for (std::size_t q = 0; q < xi.size(); ++q) v += p[1 + q] * xi[q];
    total += r == 0 ? v : v * x[r - 1];
  }
  return total;
}

double CutPool::value_in_cell(std::size_t stage, std::size_t cell, std::span<const double> xi,
                              std::span<const double> x) const {
  double best = -std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j < cut_count(stage, cell); ++j)
    best = std::max(best, evaluate_cut(cut(stage, cell, j), state_dim_, xi, x));
  return best;
}

double CutPool::value(std::size_t stage, std::span<const double> xi, std::span<const double> x) const {
  return value_in_cell(stage, partition(stage).locate(xi), xi, x);
}

namespace {
constexpr std::string_view kMagic = "SDDPCUT1";
}

void save_cuts(const CutPool& pool, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out.write(kMagic.data(), static_cast<std::streamsize>(kMagic.size()));
  detail::write_u64(out, kCutFileVersion);
  detail::write_u64(out, pool.stages());
  detail::write_u64(out, pool.state_dim_);
  detail::write_u64(out, pool.xi_dim_);
  for (std::size_t t = 0; t < pool.stages(); ++t) {
    const Partition& part = pool.partition(t);
    for (std::size_t s : part.splits()) detail::write_u64(out, s);
    for (const auto& level : part.breakpoints()) detail::write_f64s(out, level);
    detail::write_u64(out, part.cell_count());
    for (const auto& cell : pool.cells_[t]) {
      detail::write_u64(out, cell.origins.size());
      detail::write_f64s(out, cell.coefficients);
      for (const auto& o : cell.origins) {
        detail::write_u64(out, o.iteration);
        detail::write_u64(out, o.trial);
      }
    }
  }
  if (!out) throw IoError("failed writing " + path.string());
}

CutPool load_cuts(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  detail::Reader rd(in, "cut file " + path.string());
  rd.magic(kMagic);
  const auto version = rd.u64("version");
  if (version != kCutFileVersion)
    throw VersionError("cut file " + path.string() + ": version " + std::to_string(version) + ", expected " +
                       std::to_string(kCutFileVersion));
  const auto stages = rd.u64("stage count");
  const auto state_dim = rd.u64("state dimension");
  const auto xi_dim = rd.u64("xi dimension");
  if (xi_dim == 0 || xi_dim > 64 || state_dim > (1u << 20) || stages > (1u << 20))
    throw SchemaError("cut file " + path.string() + ": implausible header");

  CutPool pool;
  pool.state_dim_ = state_dim;
  pool.xi_dim_ = xi_dim;
  pool.cells_.resize(stages);
  const std::size_t block = pool.block_size();
  for (std::size_t t = 0; t < stages; ++t) {
    std::vector<std::size_t> splits(xi_dim);
    std::size_t nodes = 1;
    for (auto& s : splits) {
      s = rd.u64("splits");
      if (s == 0 || s > (1u << 24)) throw SchemaError("cut file " + path.string() + ": invalid split count");
    }
    std::vector<std::vector<double>> breakpoints(xi_dim);
    for (std::size_t k = 0; k < xi_dim; ++k) {
      breakpoints[k].resize(nodes * (splits[k] - 1));
      rd.f64s(breakpoints[k], "breakpoints");
      nodes *= splits[k];
    }
    auto part = std::make_shared<const Partition>(std::move(splits), std::move(breakpoints));
    const auto cells = rd.u64("cell count");
    if (cells != part->cell_count()) throw SchemaError("cut file " + path.string() + ": cell count mismatch");
    pool.partitions_.push_back(part);
    pool.cells_[t].resize(cells);
    for (auto& cell : pool.cells_[t]) {
      const auto count = rd.u64("cut count");
      if (count > (1u << 26)) throw SchemaError("cut file " + path.string() + ": implausible cut count");
      cell.coefficients.resize(count * block);
      rd.f64s(cell.coefficients, "cut coefficients");
      cell.origins.resize(count);
      for (auto& o : cell.origins) {
        o.iteration = rd.u64("cut origin");
        o.trial = rd.u64("cut origin");
      }
    }
  }
  rd.expect_end();
  return pool;
}

}  // namespace csddp
