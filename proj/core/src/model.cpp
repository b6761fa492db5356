#include "csddp/model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "csddp/errors.hpp"

namespace csddp {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

std::function<void(std::span<const double>, std::span<double>)> zero_bound() {
  return [](std::span<const double>, std::span<double> coef) { std::fill(coef.begin(), coef.end(), 0.0); };
}

}  // namespace

const char* to_string(ModelMode mode) { return mode == ModelMode::conditional ? "conditional" : "augmented"; }

void StorageParams::validate() const {
  if (!(capacity > 0.0)) throw ConfigError("storage: capacity must be > 0");
  if (!(max_injection >= 0.0)) throw ConfigError("storage: injection rate must be >= 0");
  if (!(max_withdrawal >= 0.0)) throw ConfigError("storage: withdrawal rate must be >= 0");
  if (!(initial_fill >= 0.0 && initial_fill <= 1.0)) throw ConfigError("storage: initial fill must lie in [0, 1]");
}

ModelInstance build_market_storage(const StorageParams& storage, const OneFactorPriceModel& price, std::size_t copies) {
  storage.validate();
  if (copies < 1) throw ConfigError("market storage: copies must be >= 1");
  const TimeGrid& grid = price.grid();
  const auto n = static_cast<Eigen::Index>(copies);

  ModelInstance model{"market", MarkovProcessModel(grid, price, std::nullopt), {}, {}, ModelMode::conditional};
  model.initial_state = Eigen::VectorXd::Constant(n, storage.initial_fill * storage.capacity);

  // E[S_k | S_i] = c_k S_i^{p_k} with p_k = e^{-alpha (t_k - t_i)}.
  const double sigma = price.sigma();
  const double alpha = price.alpha();
  const double scale = static_cast<double>(copies) * storage.max_withdrawal;
  auto tangent = [price, grid, sigma, alpha, scale](std::size_t i) {
    return [=](std::span<const double> at, std::span<double> coef) {
      const double s0 = std::max(at[0], 1e-12 * price.initial_forward(i));
      const double vi = price.factor_variance(i);
      double f = 0.0, df = 0.0;
      for (std::size_t k = i + 1; k < grid.steps; ++k) {
        const double p = std::exp(-alpha * (grid.time(k) - grid.time(i)));
        const double c = price.initial_forward(k) * std::pow(price.initial_forward(i), -p) *
                         std::exp(0.5 * (p - p * p) * sigma * sigma * vi);
        const double e = c * std::pow(s0, p);
        f += e;
        df += p * e / s0;
      }
      coef[0] = -scale * (f - df * s0);
      coef[1] = -scale * df;
    };
  };

  for (std::size_t i = 0; i < grid.steps; ++i) {
    StageTemplate st;
    st.A = Eigen::MatrixXd::Zero(n, 2 * n);
    st.B = Eigen::MatrixXd::Zero(n, n);
    st.lower.resize(2 * n);
    st.upper.resize(2 * n);
    for (Eigen::Index k = 0; k < n; ++k) {
      st.A(k, 2 * k) = -1.0;
      st.A(k, 2 * k + 1) = 1.0;
      st.B(k, k) = -1.0;
      st.lower(2 * k) = -storage.max_withdrawal;
      st.upper(2 * k) = storage.max_injection;
      st.lower(2 * k + 1) = 0.0;
      st.upper(2 * k + 1) = storage.capacity;
      st.state_vars.push_back(2 * k + 1);
      st.names.push_back("u" + std::to_string(k));
      st.names.push_back("C" + std::to_string(k));
    }
    st.cost_fn = [n](std::span<const double> xi, Eigen::VectorXd& c) {
      c.setZero(2 * n);
      for (Eigen::Index k = 0; k < n; ++k) c(2 * k) = xi[0];
    };
    st.rhs_fn = [n](std::span<const double>, std::span<const double>, Eigen::VectorXd& b) { b.setZero(n); };
    st.value_bound = tangent(i);
    if (sigma > 0.0) {
      st.value_lb = -kInf;
    } else {
      st.value_lb = 0.0;
      for (std::size_t k = i + 1; k < grid.steps; ++k) st.value_lb -= scale * price.initial_forward(k);
    }
    model.stages.push_back(std::move(st));
  }
  return model;
}

namespace {

struct DemandLayout {
  Eigen::Index copies;
  bool augmented;
  Eigen::Index vars() const { return 1 + 3 * copies + (augmented ? 1 : 0); }
  Eigen::Index rows() const { return copies + 1 + (augmented ? 1 : 0); }
  Eigen::Index state_dim() const { return copies + (augmented ? 1 : 0); }
  Eigen::Index inj(Eigen::Index k) const { return 1 + 3 * k; }
  Eigen::Index wdr(Eigen::Index k) const { return 2 + 3 * k; }
  Eigen::Index stock(Eigen::Index k) const { return 3 + 3 * k; }
  Eigen::Index next_demand() const { return 1 + 3 * copies; }
  Eigen::Index balance_row() const { return copies; }
};

/// Shared structure of the demand-driven storage models.
ModelInstance build_demand_family(std::string name, const StorageParams& storage, double injection_cost,
                                  MarkovProcessModel uncertainty, std::function<double(std::size_t, std::span<const double>)> price_at,
                                  std::size_t copies, ModelMode mode) {
  storage.validate();
  if (copies < 1) throw ConfigError(name + " storage: copies must be >= 1");
  if (!(injection_cost >= 0.0)) throw ConfigError(name + " storage: injection cost must be >= 0");
  const auto& demand = uncertainty.demand();
  if (!demand) throw ConfigError(name + " storage: demand model required");

  const TimeGrid grid = uncertainty.grid();
  const DemandLayout lay{static_cast<Eigen::Index>(copies), mode == ModelMode::augmented};
  const std::size_t demand_k = *uncertainty.demand_index();
  const AR1DemandModel dm = *demand;

  ModelInstance model{std::move(name), std::move(uncertainty), {}, {}, mode};
  model.initial_state.resize(lay.state_dim());
  model.initial_state.head(lay.copies).setConstant(storage.initial_fill * storage.capacity);
  if (lay.augmented) model.initial_state(lay.copies) = dm.mean(0);

  for (std::size_t i = 0; i < grid.steps; ++i) {
    StageTemplate st;
    st.A = Eigen::MatrixXd::Zero(lay.rows(), lay.vars());
    st.B = Eigen::MatrixXd::Zero(lay.rows(), lay.state_dim());
    st.lower = Eigen::VectorXd::Zero(lay.vars());
    st.upper = Eigen::VectorXd::Constant(lay.vars(), kInf);
    st.names.push_back("buy");
    for (Eigen::Index k = 0; k < lay.copies; ++k) {
      st.A(k, lay.stock(k)) = 1.0;
      st.A(k, lay.inj(k)) = -1.0;
      st.A(k, lay.wdr(k)) = -1.0;
      st.B(k, k) = -1.0;
      st.A(lay.balance_row(), lay.inj(k)) = -1.0;
      st.A(lay.balance_row(), lay.wdr(k)) = -1.0;
      st.upper(lay.inj(k)) = storage.max_injection;
      st.lower(lay.wdr(k)) = -storage.max_withdrawal;
      st.upper(lay.wdr(k)) = 0.0;
      st.upper(lay.stock(k)) = storage.capacity;
      st.state_vars.push_back(lay.stock(k));
      st.names.push_back("in" + std::to_string(k));
      st.names.push_back("out" + std::to_string(k));
      st.names.push_back("C" + std::to_string(k));
    }
    st.A(lay.balance_row(), 0) = 1.0;

    if (lay.augmented) {
      const Eigen::Index drow = lay.balance_row() + 1;
      st.A(drow, lay.next_demand()) = 1.0;
      st.lower(lay.next_demand()) = -kInf;
      st.state_vars.push_back(lay.next_demand());
      st.names.push_back("D");
      if (i > 0) {
        st.B(lay.balance_row(), lay.copies) = -dm.kappa();
        st.B(drow, lay.copies) = -dm.kappa();
      }
      const double constant = i > 0 ? dm.mean(i) - dm.kappa() * dm.mean(i - 1) : dm.mean(0);
      const double scale = i > 0 ? dm.sigma() : 0.0;
      st.rhs_fn = [lay, constant, scale, drow](std::span<const double>, std::span<const double> eta,
                                               Eigen::VectorXd& b) {
        b.setZero(lay.rows());
        const double load = constant + (eta.empty() ? 0.0 : scale * eta[0]);
        b(lay.balance_row()) = load;
        b(drow) = load;
      };
    } else {
      st.rhs_fn = [lay, demand_k](std::span<const double> xi, std::span<const double>, Eigen::VectorXd& b) {
        b.setZero(lay.rows());
        b(lay.balance_row()) = xi[demand_k];
      };
    }

    st.cost_fn = [lay, injection_cost, price_at, i](std::span<const double> xi, Eigen::VectorXd& c) {
      c.setZero(lay.vars());
      c(0) = price_at(i, xi);
      for (Eigen::Index k = 0; k < lay.copies; ++k) c(lay.inj(k)) = injection_cost;
    };
    // All costs are nonnegative: buying at a positive price plus a nonnegative injection fee.
    st.value_lb = 0.0;
    st.value_bound = zero_bound();
    model.stages.push_back(std::move(st));
  }
  return model;
}

}  // namespace

ModelInstance build_demand_storage(const StorageParams& storage, double injection_cost, const AR1DemandModel& demand,
                                   const std::vector<double>& price_curve, const TimeGrid& grid, std::size_t copies,
                                   ModelMode mode) {
  if (price_curve.size() < grid.steps) throw ConfigError("demand storage: price curve shorter than the stage count");
  for (double p : price_curve)
    if (!(p > 0.0)) throw ConfigError("demand storage: prices must be positive");
  MarkovProcessModel uncertainty(grid, std::nullopt, demand);
  auto price_at = [price_curve](std::size_t i, std::span<const double>) { return price_curve[i]; };
  return build_demand_family("demand", storage, injection_cost, std::move(uncertainty), price_at, copies, mode);
}

ModelInstance build_combined_storage(const StorageParams& storage, double injection_cost,
                                     const OneFactorPriceModel& price, const AR1DemandModel& demand,
                                     std::size_t copies, ModelMode mode) {
  if (mode == ModelMode::augmented)
    throw ConfigError(
        "combined storage: augmented mode is not available because the price enters the stage cost; "
        "carrying it as a state would make the stage problems bilinear (non-convex)");
  MarkovProcessModel uncertainty(price.grid(), price, demand);
  auto price_at = [](std::size_t, std::span<const double> xi) { return xi[0]; };
  return build_demand_family("combined", storage, injection_cost, std::move(uncertainty), price_at, copies, mode);
}

void instantiate_stage_into(const StageTemplate& stage, std::span<const double> state_in, std::span<const double> xi,
                            std::span<const double> innovation, Eigen::Index extra_cols, LinearProgram& lp) {
  const Eigen::Index n = stage.variables();
  const Eigen::Index rows = stage.rows();
  if (static_cast<Eigen::Index>(state_in.size()) != stage.state_dim())
    throw ConfigError("instantiate_stage: state has " + std::to_string(state_in.size()) + " entries, stage expects " +
                      std::to_string(stage.state_dim()));
  const Eigen::Index total = n + extra_cols;

  thread_local Eigen::VectorXd c, b;
  stage.cost_fn(xi, c);
  stage.rhs_fn(xi, innovation, b);
  if (c.size() != n || b.size() != rows) throw ConfigError("instantiate_stage: evaluator produced wrong dimensions");

  lp.cost.setZero(total);
  lp.cost.head(n) = c;
  lp.lower.resize(total);
  lp.upper.resize(total);
  lp.lower.head(n) = stage.lower;
  lp.upper.head(n) = stage.upper;
  lp.lower.tail(extra_cols).setConstant(-kInf);
  lp.upper.tail(extra_cols).setConstant(kInf);
  lp.eq_matrix.setZero(rows, total);
  lp.eq_matrix.leftCols(n) = stage.A;
  lp.eq_rhs = b;
  for (Eigen::Index j = 0; j < stage.state_dim(); ++j) lp.eq_rhs -= stage.B.col(j) * state_in[static_cast<std::size_t>(j)];
  lp.ineq_matrix.resize(0, total);
  lp.ineq_rhs.resize(0);
}

LinearProgram instantiate_stage(const StageTemplate& stage, std::span<const double> state_in,
                                std::span<const double> xi, std::span<const double> innovation) {
  LinearProgram lp;
  instantiate_stage_into(stage, state_in, xi, innovation, 0, lp);
  return lp;
}

double value_lower_bound(const ModelInstance& model, std::size_t stage, std::span<const double> at,
                         std::span<const double> xi) {
  const StageTemplate& st = model.stages.at(stage);
  std::vector<double> coef(1 + xi.size());
  st.value_bound(at, coef);
  double v = coef[0];
  for (std::size_t k = 0; k < xi.size(); ++k) v += coef[1 + k] * xi[k];
  return v;
}

}  // namespace csddp
