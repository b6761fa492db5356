#pragma once

#include <cstddef>
#include <memory>
#include <string>

#include <Eigen/Dense>

#include "csddp/errors.hpp"

namespace csddp {

/// min c'x  s.t.  A x = b,  G x <= h,  lower <= x <= upper  (bounds may be infinite).
struct LinearProgram {
  Eigen::VectorXd cost;
  Eigen::VectorXd lower;
  Eigen::VectorXd upper;
  Eigen::MatrixXd eq_matrix;
  Eigen::VectorXd eq_rhs;
  Eigen::MatrixXd ineq_matrix;
  Eigen::VectorXd ineq_rhs;

  LinearProgram() = default;
  /// n variables in [0, +inf), no rows.
  explicit LinearProgram(Eigen::Index n);

  Eigen::Index variables() const { return cost.size(); }
  Eigen::Index equalities() const { return eq_matrix.rows(); }
  Eigen::Index inequalities() const { return ineq_matrix.rows(); }

  /// Throws ConfigError on inconsistent shapes, crossed or NaN bounds, non-finite data.
  void validate() const;
};

enum class LpStatus { optimal, infeasible, unbounded };

const char* to_string(LpStatus status);

/// Dual convention: pi = d(value)/d(b), -rho = d(value)/d(h), rho >= 0, and
/// c - A'pi + G'rho - reduced_costs = 0 with reduced_costs >= 0 at lower bounds,
/// <= 0 at upper bounds, 0 for basic variables.
struct LpSolution {
  LpStatus status = LpStatus::infeasible;
  Eigen::VectorXd x;
  double objective = 0.0;
  Eigen::VectorXd pi;
  Eigen::VectorXd rho;
  Eigen::VectorXd reduced_costs;
  std::size_t iterations = 0;
};

struct SimplexOptions {
  double feasibility_tol = 1e-8;  ///< scaled by 1 + |rhs|_inf
  double optimality_tol = 1e-9;
  double pivot_tol = 1e-10;
  std::size_t max_iterations = 20000;
  std::size_t degenerate_before_bland = 50;
  /// Inequality rows are activated lazily once there are more than this many.
  std::size_t lazy_row_threshold = 8;
};

/// Raised when the simplex exceeds its iteration budget.
class LpIterationLimit : public Error {
 public:
  using Error::Error;
};

/// Bounded-variable primal simplex (phase 1 with artificials, then phase 2;
/// Dantzig pricing, switching to Bland's rule after a run of degenerate pivots).
/// When the LP has many inequality rows, they are activated on demand: the
/// working problem is solved and the most violated inactive rows are added until
/// the working optimum is feasible for all rows. Inactive rows get rho = 0.
/// A solver object reuses its buffers between calls; use one per thread.
class SimplexSolver {
 public:
  explicit SimplexSolver(SimplexOptions options = {});

  LpSolution solve(const LinearProgram& lp);

  const SimplexOptions& options() const { return options_; }

 private:
  struct Workspace;
  SimplexOptions options_;
  std::shared_ptr<Workspace> work_;
};

LpSolution solve(const LinearProgram& lp, const SimplexOptions& options = {});

/// Residuals of the KKT system for a claimed optimal solution, all absolute.
struct KktReport {
  double primal = 0.0;            ///< max |Ax - b|, max (Gx - h)+, max bound violation
  double dual = 0.0;              ///< max |c - A'pi + G'rho - d|
  double complementarity = 0.0;   ///< max |rho_i (Gx - h)_i|, max |d_j| * distance to its bound
  double dual_sign = 0.0;         ///< max (-rho)+ and wrong-signed reduced costs at bounds
  double max() const;
};

KktReport check_kkt(const LinearProgram& lp, const LpSolution& sol);

/// Plain-text dump for failure triage (not a stable format).
std::string dump_lp(const LinearProgram& lp);

}  // namespace csddp
