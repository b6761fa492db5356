#include "csddp/lp_solver.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>
#include <vector>

namespace csddp {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

enum class VarState : unsigned char { basic, at_lower, at_upper, free_zero };

struct PhaseOutcome {
  bool unbounded = false;
  Eigen::Index entering = -1;
  double direction = 0.0;
};

}  // namespace

LinearProgram::LinearProgram(Eigen::Index n)
    : cost(Eigen::VectorXd::Zero(n)),
      lower(Eigen::VectorXd::Zero(n)),
      upper(Eigen::VectorXd::Constant(n, kInf)),
      eq_matrix(0, n),
      eq_rhs(0),
      ineq_matrix(0, n),
      ineq_rhs(0) {}

void LinearProgram::validate() const {
  const auto n = cost.size();
  if (lower.size() != n || upper.size() != n) throw ConfigError("LP: bound vectors do not match variable count");
  if (eq_matrix.cols() != n || eq_matrix.rows() != eq_rhs.size())
    throw ConfigError("LP: equality block has inconsistent shape");
  if (ineq_matrix.cols() != n || ineq_matrix.rows() != ineq_rhs.size())
    throw ConfigError("LP: inequality block has inconsistent shape");
  for (Eigen::Index j = 0; j < n; ++j) {
    if (std::isnan(lower(j)) || std::isnan(upper(j)) || lower(j) > upper(j) || lower(j) == kInf ||
        upper(j) == -kInf)
      throw ConfigError("LP: invalid bounds on variable " + std::to_string(j));
  }
  if (!cost.allFinite() || !eq_matrix.allFinite() || !eq_rhs.allFinite() || !ineq_matrix.allFinite() ||
      !ineq_rhs.allFinite())
    throw ConfigError("LP: non-finite coefficient");
}

const char* to_string(LpStatus status) {
  switch (status) {
    case LpStatus::optimal:
      return "optimal";
    case LpStatus::infeasible:
      return "infeasible";
    case LpStatus::unbounded:
      return "unbounded";
  }
  return "unknown";
}

// ---------------------------------------------------------------------------
// Working problem: min c'z, M z = rhs, lo <= z <= up, with z = (x, slacks of the
// active inequality rows) followed by one artificial per row during phase 1.

struct SimplexSolver::Workspace {
  const SimplexOptions* opt = nullptr;

  Eigen::Index n = 0;      // structural count
  Eigen::Index rows = 0;   // working rows
  Eigen::Index cols = 0;   // structural + slack
  Eigen::Index p = 0;      // equality rows
  Eigen::MatrixXd M;
  Eigen::VectorXd rhs;
  Eigen::VectorXd cost2;   // phase-2 cost over cols
  Eigen::VectorXd lo, up;  // over cols + artificials
  Eigen::VectorXd art_sign;

  std::vector<Eigen::Index> basis;  // column per row
  std::vector<VarState> state;      // per column incl. artificials
  Eigen::VectorXd z;                // per column incl. artificials
  Eigen::MatrixXd Binv;
  Eigen::VectorXd y, w, cb;
  std::size_t iterations = 0;
  std::size_t pivots_since_refactor = 0;

  Eigen::Index total() const { return cols + rows; }
  bool is_artificial(Eigen::Index j) const { return j >= cols; }

  void load(const LinearProgram& lp, const std::vector<Eigen::Index>& active) {
    n = lp.variables();
    p = lp.equalities();
    const auto w_rows = static_cast<Eigen::Index>(active.size());
    rows = p + w_rows;
    cols = n + w_rows;
    M.setZero(rows, cols);
    rhs.resize(rows);
    if (p > 0) {
      M.topLeftCorner(p, n) = lp.eq_matrix;
      rhs.head(p) = lp.eq_rhs;
    }
    for (Eigen::Index r = 0; r < w_rows; ++r) {
      M.row(p + r).head(n) = lp.ineq_matrix.row(active[static_cast<std::size_t>(r)]);
      M(p + r, n + r) = 1.0;
      rhs(p + r) = lp.ineq_rhs(active[static_cast<std::size_t>(r)]);
    }
    cost2.setZero(cols);
    cost2.head(n) = lp.cost;
    lo.resize(total());
    up.resize(total());
    lo.head(n) = lp.lower;
    up.head(n) = lp.upper;
    lo.segment(n, w_rows).setZero();
    up.segment(n, w_rows).setConstant(kInf);
    lo.tail(rows).setZero();
    up.tail(rows).setConstant(kInf);
    art_sign.setOnes(rows);
  }

  double column_dot(const Eigen::VectorXd& v, Eigen::Index j) const {
    if (is_artificial(j)) return art_sign(j - cols) * v(j - cols);
    return v.dot(M.col(j));
  }

  void binv_times_column(Eigen::Index j, Eigen::VectorXd& out) const {
    if (is_artificial(j)) {
      out = art_sign(j - cols) * Binv.col(j - cols);
    } else {
      out.noalias() = Binv * M.col(j);
    }
  }

  /// Nonbasic start values and a slack/artificial starting basis.
  void crash() {
    state.assign(static_cast<std::size_t>(total()), VarState::at_lower);
    z.setZero(total());
    for (Eigen::Index j = 0; j < cols; ++j) {
      if (std::isfinite(lo(j))) {
        z(j) = lo(j);
        state[static_cast<std::size_t>(j)] = VarState::at_lower;
      } else if (std::isfinite(up(j))) {
        z(j) = up(j);
        state[static_cast<std::size_t>(j)] = VarState::at_upper;
      } else {
        z(j) = 0.0;
        state[static_cast<std::size_t>(j)] = VarState::free_zero;
      }
    }
    const Eigen::VectorXd residual = rhs - M * z.head(cols);
    basis.assign(static_cast<std::size_t>(rows), -1);
    Binv.setZero(rows, rows);
    for (Eigen::Index i = 0; i < rows; ++i) {
      const Eigen::Index slack = i >= p ? n + (i - p) : -1;
      if (slack >= 0 && residual(i) >= 0.0) {
        basis[static_cast<std::size_t>(i)] = slack;
        state[static_cast<std::size_t>(slack)] = VarState::basic;
        z(slack) = residual(i);
        Binv(i, i) = 1.0;
      } else {
        art_sign(i) = residual(i) >= 0.0 ? 1.0 : -1.0;
        const Eigen::Index a = cols + i;
        basis[static_cast<std::size_t>(i)] = a;
        state[static_cast<std::size_t>(a)] = VarState::basic;
        z(a) = std::abs(residual(i));
        Binv(i, i) = art_sign(i);
      }
    }
    pivots_since_refactor = 0;
  }

  bool needs_phase_one() const {
    return std::any_of(basis.begin(), basis.end(), [&](Eigen::Index j) { return is_artificial(j); });
  }

  double phase_cost(Eigen::Index j, bool phase_one) const {
    if (phase_one) return is_artificial(j) ? 1.0 : 0.0;
    return is_artificial(j) ? 0.0 : cost2(j);
  }

  void refactor() {
    Eigen::MatrixXd B(rows, rows);
    for (Eigen::Index i = 0; i < rows; ++i) {
      const Eigen::Index j = basis[static_cast<std::size_t>(i)];
      if (is_artificial(j)) {
        B.col(i).setZero();
        B(j - cols, i) = art_sign(j - cols);
      } else {
        B.col(i) = M.col(j);
      }
    }
    Binv = B.partialPivLu().inverse();
    Eigen::VectorXd r = rhs;
    for (Eigen::Index j = 0; j < total(); ++j) {
      if (state[static_cast<std::size_t>(j)] == VarState::basic || z(j) == 0.0) continue;
      if (is_artificial(j))
        r(j - cols) -= art_sign(j - cols) * z(j);
      else
        r -= M.col(j) * z(j);
    }
    const Eigen::VectorXd zb = Binv * r;
    for (Eigen::Index i = 0; i < rows; ++i) z(basis[static_cast<std::size_t>(i)]) = zb(i);
    pivots_since_refactor = 0;
  }

  void pivot(Eigen::Index leave_row, Eigen::Index entering) {
    const double piv = w(leave_row);
    Binv.row(leave_row) /= piv;
    for (Eigen::Index i = 0; i < rows; ++i) {
      if (i == leave_row || w(i) == 0.0) continue;
      Binv.row(i) -= w(i) * Binv.row(leave_row);
    }
    basis[static_cast<std::size_t>(leave_row)] = entering;
    state[static_cast<std::size_t>(entering)] = VarState::basic;
    if (++pivots_since_refactor >= 64) refactor();
  }

  void compute_duals(bool phase_one) {
    cb.resize(rows);
    for (Eigen::Index i = 0; i < rows; ++i) cb(i) = phase_cost(basis[static_cast<std::size_t>(i)], phase_one);
    y.noalias() = Binv.transpose() * cb;
  }

  double reduced_cost(Eigen::Index j, bool phase_one) const { return phase_cost(j, phase_one) - column_dot(y, j); }

  PhaseOutcome run(bool phase_one) {
    const SimplexOptions& o = *opt;
    double cost_scale = 1.0;
    if (!phase_one && cols > 0) cost_scale = std::max(1.0, cost2.cwiseAbs().maxCoeff());
    const double dtol = o.optimality_tol * cost_scale;
    std::size_t degenerate_run = 0;
    bool bland = false;

    for (;;) {
      if (iterations >= o.max_iterations) {
        std::ostringstream msg;
        msg << "simplex iteration limit (" << o.max_iterations << ") exceeded in phase " << (phase_one ? 1 : 2)
            << "; rows=" << rows << " cols=" << cols << " basis=[";
        for (std::size_t i = 0; i < basis.size(); ++i) msg << (i ? " " : "") << basis[i];
        msg << "]";
        throw LpIterationLimit(msg.str());
      }
      compute_duals(phase_one);

      // Pricing.
      Eigen::Index entering = -1;
      double direction = 0.0;
      double best = 0.0;
      for (Eigen::Index j = 0; j < total(); ++j) {
        const auto st = state[static_cast<std::size_t>(j)];
        if (st == VarState::basic || lo(j) == up(j)) continue;
        const double d = reduced_cost(j, phase_one);
        double dir = 0.0;
        if (st == VarState::at_lower && d < -dtol)
          dir = 1.0;
        else if (st == VarState::at_upper && d > dtol)
          dir = -1.0;
        else if (st == VarState::free_zero && std::abs(d) > dtol)
          dir = d < 0.0 ? 1.0 : -1.0;
        if (dir == 0.0) continue;
        if (bland) {
          entering = j;
          direction = dir;
          break;
        }
        if (std::abs(d) > best) {
          best = std::abs(d);
          entering = j;
          direction = dir;
        }
      }
      if (entering < 0) return {};

      binv_times_column(entering, w);

      // Ratio test.
      double theta = kInf;
      Eigen::Index leave = -1;
      bool leave_to_upper = false;
      double leave_alpha = 0.0;
      if (std::isfinite(lo(entering)) && std::isfinite(up(entering))) theta = up(entering) - lo(entering);
      for (Eigen::Index i = 0; i < rows; ++i) {
        const double alpha = direction * w(i);
        const Eigen::Index b = basis[static_cast<std::size_t>(i)];
        double t = kInf;
        bool to_upper = false;
        if (alpha > o.pivot_tol) {
          if (!std::isfinite(lo(b))) continue;
          t = (z(b) - lo(b)) / alpha;
        } else if (alpha < -o.pivot_tol) {
          if (!std::isfinite(up(b))) continue;
          t = (up(b) - z(b)) / (-alpha);
          to_upper = true;
        } else {
          continue;
        }
        t = std::max(t, 0.0);
        const double eps = 1e-12 * std::max(1.0, std::isfinite(theta) ? std::abs(theta) : 1.0);
        bool take = false;
        if (t < theta - eps) {
          take = true;
        } else if (t <= theta + eps) {
          if (leave < 0)
            take = true;
          else if (bland)
            take = b < basis[static_cast<std::size_t>(leave)];
          else
            take = std::abs(alpha) > std::abs(leave_alpha);
        }
        if (take) {
          theta = std::min(theta, t);
          leave = i;
          leave_to_upper = to_upper;
          leave_alpha = alpha;
        }
      }

      if (!std::isfinite(theta)) {
        PhaseOutcome out;
        out.unbounded = true;
        out.entering = entering;
        out.direction = direction;
        return out;
      }

      ++iterations;
      if (theta <= 1e-12) {
        if (++degenerate_run >= o.degenerate_before_bland) bland = true;
      } else {
        degenerate_run = 0;
      }

      const double step = direction * theta;
      z(entering) += step;
      for (Eigen::Index i = 0; i < rows; ++i) z(basis[static_cast<std::size_t>(i)]) -= step * w(i);

      if (leave < 0) {
        // Bound flip of the entering variable.
        const bool up_now = direction > 0.0;
        z(entering) = up_now ? up(entering) : lo(entering);
        state[static_cast<std::size_t>(entering)] = up_now ? VarState::at_upper : VarState::at_lower;
        continue;
      }
      const Eigen::Index leaving = basis[static_cast<std::size_t>(leave)];
      z(leaving) = leave_to_upper ? up(leaving) : lo(leaving);
      state[static_cast<std::size_t>(leaving)] = leave_to_upper ? VarState::at_upper : VarState::at_lower;
      pivot(leave, entering);
    }
  }

  /// Pivots basic artificials out after phase 1; rows where that is impossible are redundant.
  void drive_out_artificials() {
    for (Eigen::Index i = 0; i < rows; ++i) {
      if (!is_artificial(basis[static_cast<std::size_t>(i)])) continue;
      const Eigen::VectorXd binv_row = Binv.row(i);
      Eigen::Index best_j = -1;
      double best = opt->pivot_tol;
      for (Eigen::Index j = 0; j < cols; ++j) {
        if (state[static_cast<std::size_t>(j)] == VarState::basic) continue;
        const double a = std::abs(binv_row.dot(M.col(j)));
        if (a > best) {
          best = a;
          best_j = j;
        }
      }
      if (best_j < 0) continue;
      binv_times_column(best_j, w);
      const Eigen::Index art = basis[static_cast<std::size_t>(i)];
      z(art) = 0.0;
      state[static_cast<std::size_t>(art)] = VarState::at_lower;
      pivot(i, best_j);
    }
    for (Eigen::Index a = cols; a < total(); ++a) up(a) = 0.0;
    refactor();
  }
};

SimplexSolver::SimplexSolver(SimplexOptions options)
    : options_(options), work_(std::make_shared<Workspace>()) {}

LpSolution SimplexSolver::solve(const LinearProgram& lp) {
  lp.validate();
  Workspace& ws = *work_;
  ws.opt = &options_;
  ws.iterations = 0;

  const Eigen::Index n = lp.variables();
  const Eigen::Index q = lp.inequalities();
  const bool lazy = static_cast<std::size_t>(q) > options_.lazy_row_threshold;
  std::vector<Eigen::Index> active;
  std::vector<char> is_active(static_cast<std::size_t>(q), 0);
  if (!lazy) {
    active.resize(static_cast<std::size_t>(q));
    std::iota(active.begin(), active.end(), Eigen::Index{0});
    std::fill(is_active.begin(), is_active.end(), 1);
  }
  Eigen::VectorXd row_norm(q);
  for (Eigen::Index i = 0; i < q; ++i) row_norm(i) = std::max(lp.ineq_matrix.row(i).cwiseAbs().maxCoeff(), 1e-300);

  LpSolution sol;
  for (;;) {
    ws.load(lp, active);
    ws.crash();
    const double rhs_scale = 1.0 + (ws.rows > 0 ? ws.rhs.cwiseAbs().maxCoeff() : 0.0);

    if (ws.needs_phase_one()) {
      ws.run(true);
      const double infeasibility = ws.z.tail(ws.rows).sum();
      if (infeasibility > options_.feasibility_tol * rhs_scale) {
        sol = {};
        sol.status = LpStatus::infeasible;
        sol.iterations = ws.iterations;
        return sol;
      }
      ws.drive_out_artificials();
    } else {
      for (Eigen::Index a = ws.cols; a < ws.total(); ++a) ws.up(a) = 0.0;
    }

    const PhaseOutcome outcome = ws.run(false);
    if (outcome.unbounded) {
      // Recession direction of the working problem, restricted to structurals.
      Eigen::VectorXd ray = Eigen::VectorXd::Zero(n);
      if (outcome.entering < n) ray(outcome.entering) = outcome.direction;
      for (Eigen::Index i = 0; i < ws.rows; ++i) {
        const Eigen::Index b = ws.basis[static_cast<std::size_t>(i)];
        if (b < n) ray(b) = -outcome.direction * ws.w(i);
      }
      Eigen::Index blocker = -1;
      double best = 0.0;
      for (Eigen::Index i = 0; i < q; ++i) {
        if (is_active[static_cast<std::size_t>(i)]) continue;
        const double g = lp.ineq_matrix.row(i).dot(ray) / row_norm(i);
        if (g > best + 1e-12) {
          best = g;
          blocker = i;
        }
      }
      if (blocker < 0) {
        sol = {};
        sol.status = LpStatus::unbounded;
        sol.iterations = ws.iterations;
        return sol;
      }
      active.push_back(blocker);
      is_active[static_cast<std::size_t>(blocker)] = 1;
      continue;
    }

    const Eigen::VectorXd x = ws.z.head(n);
    if (lazy) {
      // Activate the most violated inactive rows, if any.
      std::vector<std::pair<double, Eigen::Index>> violated;
      const double x_scale = x.size() > 0 ? x.cwiseAbs().maxCoeff() : 0.0;
      for (Eigen::Index i = 0; i < q; ++i) {
        if (is_active[static_cast<std::size_t>(i)]) continue;
        const double v = lp.ineq_matrix.row(i).dot(x) - lp.ineq_rhs(i);
        const double tol = options_.feasibility_tol * (1.0 + std::abs(lp.ineq_rhs(i)) + row_norm(i) * x_scale);
        if (v > tol) violated.emplace_back(v / row_norm(i), i);
      }
      if (!violated.empty()) {
        const std::size_t take = std::min<std::size_t>(violated.size(), 4);
        std::partial_sort(violated.begin(), violated.begin() + static_cast<std::ptrdiff_t>(take), violated.end(),
                          [](const auto& a, const auto& b) { return a.first > b.first || (a.first == b.first && a.second < b.second); });
        for (std::size_t k = 0; k < take; ++k) {
          active.push_back(violated[k].second);
          is_active[static_cast<std::size_t>(violated[k].second)] = 1;
        }
        continue;
      }
    }

    ws.compute_duals(false);
    sol.status = LpStatus::optimal;
    sol.x = x;
    sol.objective = lp.cost.dot(x);
    sol.pi = ws.y.head(ws.p);
    sol.rho = Eigen::VectorXd::Zero(q);
    for (std::size_t r = 0; r < active.size(); ++r) sol.rho(active[r]) = -ws.y(ws.p + static_cast<Eigen::Index>(r));
    sol.reduced_costs.resize(n);
    for (Eigen::Index j = 0; j < n; ++j) sol.reduced_costs(j) = lp.cost(j) - ws.y.dot(ws.M.col(j));
    sol.iterations = ws.iterations;
    return sol;
  }
}

LpSolution solve(const LinearProgram& lp, const SimplexOptions& options) { return SimplexSolver(options).solve(lp); }

// ---------------------------------------------------------------------------

double KktReport::max() const { return std::max({primal, dual, complementarity, dual_sign}); }

KktReport check_kkt(const LinearProgram& lp, const LpSolution& sol) {
  KktReport r;
  const auto n = lp.variables();
  const Eigen::VectorXd& x = sol.x;
  if (lp.equalities() > 0) r.primal = (lp.eq_matrix * x - lp.eq_rhs).cwiseAbs().maxCoeff();
  Eigen::VectorXd slack_viol;
  if (lp.inequalities() > 0) {
    slack_viol = lp.ineq_matrix * x - lp.ineq_rhs;
    r.primal = std::max(r.primal, slack_viol.maxCoeff());
    for (Eigen::Index i = 0; i < lp.inequalities(); ++i) {
      r.complementarity = std::max(r.complementarity, std::abs(sol.rho(i) * slack_viol(i)));
      r.dual_sign = std::max(r.dual_sign, -sol.rho(i));
    }
  }
  Eigen::VectorXd stationarity = lp.cost - sol.reduced_costs;
  if (lp.equalities() > 0) stationarity -= lp.eq_matrix.transpose() * sol.pi;
  if (lp.inequalities() > 0) stationarity += lp.ineq_matrix.transpose() * sol.rho;
  if (n > 0) r.dual = stationarity.cwiseAbs().maxCoeff();

  for (Eigen::Index j = 0; j < n; ++j) {
    r.primal = std::max({r.primal, lp.lower(j) - x(j), x(j) - lp.upper(j)});
    const double d = sol.reduced_costs(j);
    const double to_lower = std::isfinite(lp.lower(j)) ? std::abs(x(j) - lp.lower(j)) : kInf;
    const double to_upper = std::isfinite(lp.upper(j)) ? std::abs(lp.upper(j) - x(j)) : kInf;
    const double at_tol = 1e-9 * (1.0 + std::abs(x(j)));
    const bool at_lower = to_lower <= at_tol;
    const bool at_upper = to_upper <= at_tol;
    if (at_lower && !at_upper) r.dual_sign = std::max(r.dual_sign, -d);
    if (at_upper && !at_lower) r.dual_sign = std::max(r.dual_sign, d);
    const double dist = std::min(to_lower, to_upper);
    r.complementarity = std::max(r.complementarity, std::isfinite(dist) ? std::abs(d) * dist : std::abs(d));
  }
  r.primal = std::max(r.primal, 0.0);
  return r;
}

std::string dump_lp(const LinearProgram& lp) {
  std::ostringstream out;
  out.precision(17);
  const auto n = lp.variables();
  out << "minimize\n ";
  for (Eigen::Index j = 0; j < n; ++j) out << ' ' << lp.cost(j) << "*x" << j;
  out << "\nequalities " << lp.equalities() << '\n';
  for (Eigen::Index i = 0; i < lp.equalities(); ++i) {
    out << ' ';
    for (Eigen::Index j = 0; j < n; ++j)
      if (lp.eq_matrix(i, j) != 0.0) out << ' ' << lp.eq_matrix(i, j) << "*x" << j;
    out << " = " << lp.eq_rhs(i) << '\n';
  }
  out << "inequalities " << lp.inequalities() << '\n';
  for (Eigen::Index i = 0; i < lp.inequalities(); ++i) {
    out << ' ';
    for (Eigen::Index j = 0; j < n; ++j)
      if (lp.ineq_matrix(i, j) != 0.0) out << ' ' << lp.ineq_matrix(i, j) << "*x" << j;
    out << " <= " << lp.ineq_rhs(i) << '\n';
  }
  out << "bounds\n";
  for (Eigen::Index j = 0; j < n; ++j) out << "  " << lp.lower(j) << " <= x" << j << " <= " << lp.upper(j) << '\n';
  return out.str();
}

}  // namespace csddp
