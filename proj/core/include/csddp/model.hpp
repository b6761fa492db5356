#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "csddp/lp_solver.hpp"
#include "csddp/scenario.hpp"

namespace csddp {

/// How stage-wise dependence is handled by the engine.
///  conditional: cuts are affine in the Markov state xi and local to a mesh cell.
///  augmented:   the lagged uncertainty is carried as a state variable, cuts are constant.
enum class ModelMode { conditional, augmented };

const char* to_string(ModelMode mode);

/// Stage data min c(xi)'x s.t. A x = b(xi, eta) - B x_prev, lower <= x <= upper.
/// A, B and bounds are fixed; cost and right-hand side depend on the realized
/// Markov state xi (and on the innovation eta in augmented mode).
struct StageTemplate {
  Eigen::MatrixXd A;
  Eigen::MatrixXd B;  ///< rows x state_dim, acting on the incoming state
  Eigen::VectorXd lower;
  Eigen::VectorXd upper;
  /// Decision variables forming the outgoing state, in state order.
  std::vector<Eigen::Index> state_vars;
  std::function<void(std::span<const double> xi, Eigen::VectorXd& cost)> cost_fn;
  std::function<void(std::span<const double> xi, std::span<const double> innovation, Eigen::VectorXd& rhs)> rhs_fn;
  /// Constant lower bound on the cost-to-go after this stage, -inf when none exists.
  double value_lb = 0.0;
  /// Affine minorant of the cost-to-go after this stage as a function of xi, valid for
  /// every xi and tight at `at`; writes 1 + m coefficients (constant, then xi terms).
  std::function<void(std::span<const double> at, std::span<double> coefficients)> value_bound;
  std::vector<std::string> names;

  Eigen::Index variables() const { return A.cols(); }
  Eigen::Index rows() const { return A.rows(); }
  Eigen::Index state_dim() const { return B.cols(); }
};

struct ModelInstance {
  std::string name;
  MarkovProcessModel uncertainty;
  std::vector<StageTemplate> stages;  ///< decision stages at dates 0..T-1
  Eigen::VectorXd initial_state;      ///< state entering stage 0
  ModelMode mode = ModelMode::conditional;

  std::size_t stage_count() const { return stages.size(); }
  Eigen::Index state_dim() const { return initial_state.size(); }
};

struct StorageParams {
  double capacity = 360000.0;   ///< C_max
  double max_injection = 60000.0;
  double max_withdrawal = 45000.0;
  double initial_fill = 1.0;    ///< C_0 as a fraction of capacity

  void validate() const;
};

/// Storage trading against a stochastic spot price: per facility k,
/// u_k in [-a_out, a_in], C'_k in [0, C_max], C'_k - u_k = C_k; cost sum_k S_i u_k.
/// The value bound is the tangent of -n a_out sum_k E[S_k | S_i], which is convex in S_i.
ModelInstance build_market_storage(const StorageParams& storage, const OneFactorPriceModel& price,
                                   std::size_t copies = 1);

/// Storage serving an AR(1) load at deterministic prices `price_curve` (one per date).
/// Variables: x_b >= 0, then per facility (x_in, x_out, C'), then D' in augmented mode.
/// Rows: per facility C' - x_in - x_out = C, then the shared balance x_b - sum(x_in + x_out) = D,
/// then (augmented) the demand recursion for D'. Cost F_i x_b + injection_cost * sum x_in.
/// The caller scales the demand model for several facilities.
ModelInstance build_demand_storage(const StorageParams& storage, double injection_cost, const AR1DemandModel& demand,
                                   const std::vector<double>& price_curve, const TimeGrid& grid,
                                   std::size_t copies = 1, ModelMode mode = ModelMode::conditional);

/// Demand storage with a stochastic spot price in the cost; xi = (S, D).
/// Throws ConfigError for augmented mode (price uncertainty enters the cost).
ModelInstance build_combined_storage(const StorageParams& storage, double injection_cost,
                                     const OneFactorPriceModel& price, const AR1DemandModel& demand,
                                     std::size_t copies = 1, ModelMode mode = ModelMode::conditional);

/// Stage LP without epigraph column or cut rows.
LinearProgram instantiate_stage(const StageTemplate& stage, std::span<const double> state_in,
                                std::span<const double> xi, std::span<const double> innovation = {});

/// Same as instantiate_stage, writing into an existing LP and reserving `extra_cols`
/// trailing free columns (zero cost, zero rows) for the caller.
void instantiate_stage_into(const StageTemplate& stage, std::span<const double> state_in, std::span<const double> xi,
                            std::span<const double> innovation, Eigen::Index extra_cols, LinearProgram& lp);

/// Affine minorant of the cost-to-go after `stage`, taken tangent at `at` and evaluated at `xi`.
double value_lower_bound(const ModelInstance& model, std::size_t stage, std::span<const double> at,
                         std::span<const double> xi);

}  // namespace csddp
