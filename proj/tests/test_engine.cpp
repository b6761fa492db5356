#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <random>

#include <gtest/gtest.h>

#include "csddp/engine.hpp"
#include "csddp/errors.hpp"
#include "csddp/model.hpp"
#include "csddp/random.hpp"
#include "oracles.hpp"

using namespace csddp;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

StorageParams unit_storage() {
  StorageParams st;
  st.capacity = 1.0;
  st.max_injection = 1.0;
  st.max_withdrawal = 1.0;
  return st;
}

ModelInstance market(std::size_t steps, double sigma, std::size_t copies = 1) {
  return build_market_storage(StorageParams{},
                              OneFactorPriceModel::with_sinusoidal_curve(sigma, 0.29, TimeGrid(1.0, steps)), copies);
}

// Starting empty keeps short horizons from being covered by the initial stock.
StorageParams empty_storage() {
  StorageParams st;
  st.initial_fill = 0.0;
  return st;
}

ModelInstance demand(std::size_t steps, double sigma_d, ModelMode mode) {
  const TimeGrid grid(1.0, steps);
  std::vector<double> curve;
  for (std::size_t i = 0; i <= steps; ++i) curve.push_back(forward_curve(i, steps));
  return build_demand_storage(empty_storage(), 0.1, AR1DemandModel::with_sinusoidal_mean(0.9, sigma_d, grid, 1.0),
                              curve, grid, 1, mode);
}

ModelInstance combined(std::size_t steps) {
  const TimeGrid grid(1.0, steps);
  return build_combined_storage(empty_storage(), 0.1, OneFactorPriceModel::with_sinusoidal_curve(0.94, 0.29, grid),
                                AR1DemandModel::with_sinusoidal_mean(0.9, 1000.0, grid, 1.0));
}

SddpConfig small_config(std::vector<std::size_t> splits, std::size_t iterations) {
  SddpConfig cfg;
  cfg.splits = std::move(splits);
  cfg.max_iterations = iterations;
  cfg.eval_period = iterations;
  cfg.eval_samples = 200;
  cfg.rel_gap = 1e-12;
  cfg.seed = 11;
  return cfg;
}

bool non_decreasing(const RunReport& r) {
  for (std::size_t k = 1; k < r.iterations.size(); ++k) {
    const double prev = r.iterations[k - 1].z_lower;
    if (r.iterations[k].z_lower < prev - 1e-9 * std::max(1.0, std::abs(prev))) return false;
  }
  return r.monotone;
}

}  // namespace

TEST(Engine, ToyTwoStageIsExact) {
  const OneFactorPriceModel price(0.0, 0.29, TimeGrid(1.0, 2), {50.0, 60.0, 55.0});
  const auto model = build_market_storage(unit_storage(), price);
  const ScenarioSet scen = simulate(model.uncertainty, 10, 7);
  SddpConfig cfg = small_config({}, 10);
  cfg.eval_period = 1;
  cfg.rel_gap = 1e-6;
  const RunResult res = run(model, scen, cfg);
  EXPECT_EQ(res.report.status, RunStatus::converged);
  EXPECT_NEAR(res.report.z_lower, -60.0, 1e-9);
  EXPECT_NEAR(res.report.eval_mean, -60.0, 1e-9);
  EXPECT_EQ(res.report.eval_std, 0.0);
}

TEST(Engine, DeterministicMarketMatchesMonolithicLp) {
  const auto model = market(52, 0.0);
  const StorageParams st;
  const LpSolution mono =
      solve(oracle::storage_monolithic_lp(model.uncertainty.price()->initial_curve(), 52, st.capacity,
                                          st.max_injection, st.max_withdrawal, st.capacity));
  ASSERT_EQ(mono.status, LpStatus::optimal);
  const ScenarioSet scen = simulate(model.uncertainty, 20, 7);
  SddpConfig cfg = small_config({}, 200);
  cfg.eval_period = 1;
  cfg.eval_samples = 5;
  cfg.rel_gap = 1e-9;
  const RunResult res = run(model, scen, cfg);
  EXPECT_EQ(res.report.status, RunStatus::converged);
  EXPECT_NEAR(res.report.z_lower, mono.objective, 1e-6 * std::abs(mono.objective));
  EXPECT_NEAR(res.report.eval_mean, mono.objective, 1e-6 * std::abs(mono.objective));
  // Warm-started bases differ between paths, so costs agree only to round-off.
  EXPECT_LE(res.report.eval_std, 1e-12 * std::abs(mono.objective));
  EXPECT_TRUE(non_decreasing(res.report));
}

TEST(Engine, LowerBoundIsMonotone) {
  {
    const auto model = market(12, 0.94);
    const RunResult r = run(model, simulate(model.uncertainty, 400, 7), small_config({4}, 8));
    EXPECT_TRUE(non_decreasing(r.report));
  }
  {
    const auto model = demand(12, 1000.0, ModelMode::conditional);
    const RunResult r = run(model, simulate(model.uncertainty, 400, 7), small_config({4}, 8));
    EXPECT_TRUE(non_decreasing(r.report));
  }
  {
    const auto model = demand(12, 1000.0, ModelMode::augmented);
    SddpConfig cfg = small_config({}, 8);
    cfg.inner_samples = 50;
    cfg.forward_count = 2;
    const RunResult r = run(model, simulate(model.uncertainty, 10, 7), cfg);
    EXPECT_TRUE(non_decreasing(r.report));
  }
  {
    const auto model = combined(10);
    const RunResult r = run(model, simulate(model.uncertainty, 400, 7), small_config({2, 2}, 6));
    EXPECT_TRUE(non_decreasing(r.report));
  }
}

TEST(Engine, SingleSampleCellGivesTangentCut) {
  // One sample per cell: the regression degenerates to that sample's value and subgradient.
  const auto model = market(8, 0.94);
  const ScenarioSet scen = simulate(model.uncertainty, 4, 7);
  SddpConfig cfg = small_config({4}, 1);
  cfg.forward_count = 1;
  SddpEngine engine(model, scen, cfg);
  const ScenarioSet paths = simulate(model.uncertainty, 1, 123);
  const ForwardResult fr = engine.forward_pass(paths);
  engine.backward_pass(fr, 1);
  const std::vector<double> zeros(1, 0.0);
  for (std::size_t t = 1; t + 1 < model.stage_count(); ++t) {
    const TrialPoint& tr = fr.trials[t][0];
    const auto& members = engine.pool().partition(t).cell_members()[tr.cell];
    ASSERT_EQ(members.size(), 1u);
    const std::size_t s = members[0];
    const std::size_t next_cell = t + 2 < model.stage_count() ? engine.pool().partition(t + 1).sample_cells()[s] : 0;
    const auto r = engine.solve_stage(t + 1, tr.state, scen.state(s, t + 1), zeros, next_cell, 0);
    const std::size_t n = engine.pool().cut_count(t, tr.cell);
    const auto block = engine.pool().cut(t, tr.cell, n - 1);
    const double xbar = tr.state[0];
    EXPECT_NEAR(block[0], r.value - r.subgradient(0) * xbar, 1e-9 * std::abs(r.value)) << "stage " << t;
    EXPECT_EQ(block[1], 0.0);
    EXPECT_NEAR(block[2], r.subgradient(0), 1e-12 * std::max(1.0, std::abs(r.subgradient(0))));
    EXPECT_EQ(block[3], 0.0);
  }
}

TEST(Engine, LastStageCutIsRegressionOfClosedForm) {
  // At the last decision date the stage value is -S * min(a_out, C), so the cut on the
  // preceding stage must reproduce the least-squares line of those values against S.
  const std::size_t steps = 6;
  const auto model = market(steps, 0.94);
  const StorageParams st;
  const ScenarioSet scen = simulate(model.uncertainty, 200, 7);
  SddpConfig cfg = small_config({4}, 1);
  cfg.forward_count = 3;
  SddpEngine engine(model, scen, cfg);
  const ForwardResult fr = engine.forward_pass(simulate(model.uncertainty, 3, 321));
  engine.backward_pass(fr, 1);

  const std::size_t t = steps - 2;
  std::size_t checked = 0;
  for (const TrialPoint& tr : fr.trials[t]) {
    const double xbar = tr.state[0];
    const auto& members = engine.pool().partition(t).cell_members()[tr.cell];
    double sx = 0, sy = 0, sg = 0, sxx = 0, sxy = 0, sxg = 0;
    for (std::size_t s : members) {
      const double x = scen.at(s, t, 0), spot = scen.at(s, t + 1, 0);
      const double v = -spot * std::min(st.max_withdrawal, xbar);
      const double g = xbar < st.max_withdrawal ? -spot : 0.0;
      sx += x, sy += v, sg += g, sxx += x * x, sxy += x * v, sxg += x * g;
    }
    const double n = static_cast<double>(members.size());
    const double den = n * sxx - sx * sx;
    const double bv = (n * sxy - sx * sy) / den, av = (sy - bv * sx) / n;
    const double bg = (n * sxg - sx * sg) / den, ag = (sg - bg * sx) / n;

    // Find the cut added for this trial.
    const auto& origins = engine.pool().origins(t, tr.cell);
    std::size_t j = origins.size();
    for (std::size_t k = 0; k < origins.size(); ++k)
      if (origins[k].iteration == 1 && origins[k].trial == tr.path) j = k;
    if (j == origins.size()) continue;  // a duplicate trial in the same cell
    const auto block = engine.pool().cut(t, tr.cell, j);
    for (std::size_t s : members) {
      const double xi[1] = {scen.at(s, t, 0)};
      const double x[1] = {xbar};
      const double expected = av + bv * xi[0];
      EXPECT_NEAR(evaluate_cut(block, 1, xi, x), expected, 1e-8 * std::abs(expected));
      EXPECT_NEAR(block[2] + block[3] * xi[0], ag + bg * xi[0], 1e-8 * std::max(1.0, std::abs(ag + bg * xi[0])));
    }
    ++checked;
  }
  EXPECT_GE(checked, 1u);
}

TEST(Engine, DualityIdentityWithCutRows) {
  // min c'y + r  s.t.  A y = b0 + Bt xbar, H y <= h, beta_j' (E y) - r <= -alpha_j, y >= 0, r free.
  // With value v(xbar) and subgradient g = Bt' pi:  v - g' xbar = b0' pi - h' rho_H + sum_j alpha_j rho_j.
  std::mt19937_64 rng(41);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  SimplexSolver solver;
  int checked = 0;
  for (int k = 0; k < 200; ++k) {
    const LinearProgram base = oracle::random_nonnegative_lp(rng, 2, 2);
    const Eigen::Index n = base.variables();
    const Eigen::Index cuts = 5;
    LinearProgram lp(n + 1);
    lp.cost.head(n) = base.cost;
    lp.cost(n) = 1.0;
    lp.lower.head(n).setZero();
    lp.upper.head(n).setConstant(kInf);
    lp.lower(n) = -kInf;
    lp.upper(n) = kInf;
    Eigen::MatrixXd Bt(base.equalities(), 2);
    for (Eigen::Index r = 0; r < Bt.rows(); ++r) Bt.row(r) << 0.1 * u(rng), 0.1 * u(rng);
    const Eigen::Vector2d xbar(u(rng), u(rng));
    lp.eq_matrix.setZero(base.equalities(), n + 1);
    lp.eq_matrix.leftCols(n) = base.eq_matrix;
    const Eigen::VectorXd b0 = base.eq_rhs;
    lp.eq_rhs = b0 + Bt * xbar;
    const Eigen::Index h_rows = base.inequalities();
    lp.ineq_matrix.setZero(h_rows + cuts, n + 1);
    lp.ineq_rhs.resize(h_rows + cuts);
    lp.ineq_matrix.topLeftCorner(h_rows, n) = base.ineq_matrix;
    lp.ineq_rhs.head(h_rows) = base.ineq_rhs;
    Eigen::VectorXd alpha(cuts);
    for (Eigen::Index j = 0; j < cuts; ++j) {
      alpha(j) = u(rng);
      for (Eigen::Index q = 0; q < n; ++q) lp.ineq_matrix(h_rows + j, q) = u(rng);
      lp.ineq_matrix(h_rows + j, n) = -1.0;
      lp.ineq_rhs(h_rows + j) = -alpha(j);
    }
    const LpSolution sol = solver.solve(lp);
    if (sol.status != LpStatus::optimal) continue;
    const Eigen::Vector2d g = Bt.transpose() * sol.pi;
    const double lhs = sol.objective - g.dot(xbar);
    const double rhs = b0.dot(sol.pi) - base.ineq_rhs.dot(sol.rho.head(h_rows)) + alpha.dot(sol.rho.tail(cuts));
    EXPECT_NEAR(lhs, rhs, 1e-8 * std::max(1.0, std::abs(lhs))) << "instance " << k;
    ++checked;
  }
  EXPECT_GE(checked, 150);
}

TEST(Engine, StageSubgradientMatchesFiniteDifference) {
  const auto model = market(12, 0.94);
  const ScenarioSet scen = simulate(model.uncertainty, 400, 7);
  SddpEngine engine(model, scen, small_config({4}, 1));
  for (std::size_t it = 1; it <= 4; ++it)
    engine.backward_pass(engine.forward_pass(simulate(model.uncertainty, 4, derive_seed(5, 1, it))), it);
  const double h = 1e-5;
  const std::vector<double> zeros(1, 0.0);
  int checked = 0;
  for (std::size_t t : {2u, 5u, 9u}) {
    for (double c : {20000.0, 100000.0, 250000.0, 350000.0}) {
      const double xi[1] = {scen.at(3, t, 0)};
      const std::size_t cell = engine.pool().partition(t).locate(xi);
      auto value = [&](double stock) {
        const double s[1] = {stock};
        return engine.solve_stage(t, s, xi, zeros, cell, 0).value;
      };
      const double s0[1] = {c};
      const double g = engine.solve_stage(t, s0, xi, zeros, cell, 0).subgradient(0);
      const double right = (value(c + h) - value(c)) / h, left = (value(c) - value(c - h)) / h;
      if (std::abs(right - left) > 1e-4) continue;
      EXPECT_NEAR(g, 0.5 * (right + left), 1e-4) << "stage " << t << " stock " << c;
      ++checked;
    }
  }
  EXPECT_GE(checked, 6);
}

TEST(Engine, AugmentedCutSlopeMatchesInnerAverage) {
  const auto model = demand(8, 1000.0, ModelMode::augmented);
  const ScenarioSet scen = simulate(model.uncertainty, 4, 7);
  SddpConfig cfg = small_config({}, 1);
  cfg.inner_samples = 20;
  cfg.forward_count = 1;
  SddpEngine engine(model, scen, cfg);
  const ForwardResult fr = engine.forward_pass(simulate(model.uncertainty, 1, 99));
  engine.backward_pass(fr, 1);

  const std::uint64_t inner = derive_seed(cfg.seed, 3, 0);
  const std::vector<double> xi(1, 0.0);
  const double h = 1e-3;
  for (std::size_t t : {1u, 4u}) {
    const TrialPoint& tr = fr.trials[t][0];
    auto average = [&](std::vector<double> state) {
      double sum = 0.0;
      for (std::size_t j = 0; j < cfg.inner_samples; ++j) {
        const double eta[1] = {keyed_normal(inner, j, t + 1, 0)};
        sum += engine.solve_stage(t + 1, state, xi, eta, 0, 0).value;
      }
      return sum / static_cast<double>(cfg.inner_samples);
    };
    const std::size_t n = engine.pool().cut_count(t, 0);
    const auto block = engine.pool().cut(t, 0, n - 1);
    const std::size_t d = tr.state.size();
    const double at_trial = average(tr.state);
    double cut_at_trial = block[0];
    for (std::size_t k = 0; k < d; ++k) cut_at_trial += block[(1 + k) * 2] * tr.state[k];
    EXPECT_NEAR(cut_at_trial, at_trial, 1e-9 * std::abs(at_trial));
    // Demand coordinate is the last state component.
    std::vector<double> up = tr.state, down = tr.state;
    up[d - 1] += h;
    down[d - 1] -= h;
    const double fd = (average(up) - average(down)) / (2 * h);
    EXPECT_NEAR(block[d * 2], fd, 1e-4 * std::max(1.0, std::abs(fd))) << "stage " << t;
  }
}

TEST(Engine, AugmentedWithoutNoiseMatchesConditional) {
  // Seed cuts differ between the modes, so only the converged bounds are compared.
  const auto cond = demand(10, 0.0, ModelMode::conditional);
  const auto aug = demand(10, 0.0, ModelMode::augmented);
  SddpConfig cfg = small_config({}, 50);
  cfg.eval_period = 1;
  cfg.eval_samples = 2;
  cfg.rel_gap = 1e-9;
  cfg.forward_count = 1;
  cfg.inner_samples = 1;
  const RunResult a = run(cond, simulate(cond.uncertainty, 5, 7), cfg);
  const RunResult b = run(aug, simulate(aug.uncertainty, 5, 7), cfg);
  ASSERT_EQ(a.report.status, RunStatus::converged);
  ASSERT_EQ(b.report.status, RunStatus::converged);
  EXPECT_NEAR(a.report.z_lower, b.report.z_lower, 1e-9 * std::abs(a.report.z_lower));
  const LpSolution chained = solve(oracle::chained_lp(cond, [&] {
    std::vector<std::vector<double>> path;
    const ScenarioSet one = simulate(cond.uncertainty, 1, 1);
    for (std::size_t i = 0; i < one.dates(); ++i) path.emplace_back(one.state(0, i).begin(), one.state(0, i).end());
    return path;
  }()));
  ASSERT_EQ(chained.status, LpStatus::optimal);
  EXPECT_NEAR(a.report.z_lower, chained.objective, 1e-9 * std::abs(chained.objective));
}

TEST(Engine, StoppingRule) {
  SddpConfig cfg;
  cfg.rel_gap = 1e-3;
  auto d = stopping_check(-100.0, -101.0, 10.0, 100, cfg);
  EXPECT_NEAR(d.gap_rel, (-101.0 + 100.0) / 101.0, 1e-15);
  EXPECT_TRUE(d.stop);  // negative gap stops
  EXPECT_FALSE(d.overshoot);
  EXPECT_NEAR(d.gap_conf, -101.0 + 1.96 * 10.0 / std::sqrt(100.0) + 100.0, 1e-12);

  d = stopping_check(-100.0, -110.0, 10.0, 100, cfg);
  EXPECT_TRUE(d.overshoot);  // 10 above the estimate, 3 SE = 3

  d = stopping_check(-110.0, -100.0, 10.0, 100, cfg);
  EXPECT_NEAR(d.gap_rel, 0.1, 1e-15);
  EXPECT_FALSE(d.stop);

  d = stopping_check(-100.05, -100.0, 10.0, 100, cfg);
  EXPECT_TRUE(d.stop);

  // Deterministic runs: round-off above a zero-spread estimate is not an overshoot.
  d = stopping_check(-2.8e7 + 5e-6, -2.8e7, 0.0, 100, cfg);
  EXPECT_FALSE(d.overshoot);
  EXPECT_TRUE(stopping_check(-2.8e7 + 1.0, -2.8e7, 0.0, 100, cfg).overshoot);
}

TEST(Engine, DeterministicEvaluationHasZeroSpread) {
  const auto model = market(10, 0.0);
  const ScenarioSet scen = simulate(model.uncertainty, 5, 7);
  SddpEngine engine(model, scen, small_config({}, 1));
  engine.backward_pass(engine.forward_pass(simulate(model.uncertainty, 1, 1)), 1);
  const auto [mean, sd] = engine.evaluate_policy(50, 3);
  EXPECT_LE(sd, 1e-12 * std::abs(mean));
  EXPECT_LT(mean, 0.0);
}

TEST(Engine, ThreadCountDoesNotChangeResults) {
  const auto model = combined(10);
  const ScenarioSet scen = simulate(model.uncertainty, 400, 7);
  SddpConfig one = small_config({2, 2}, 4);
  one.threads = 1;
  SddpConfig eight = one;
  eight.threads = 8;
  const RunResult a = run(model, scen, one);
  const RunResult b = run(model, scen, eight);
  ASSERT_EQ(a.report.iterations.size(), b.report.iterations.size());
  for (std::size_t k = 0; k < a.report.iterations.size(); ++k) {
    const auto &x = a.report.iterations[k], &y = b.report.iterations[k];
    EXPECT_EQ(std::memcmp(&x.z_lower, &y.z_lower, sizeof(double)), 0);
    EXPECT_EQ(std::memcmp(&x.fwd_mean, &y.fwd_mean, sizeof(double)), 0);
    EXPECT_EQ(x.eval_mean, y.eval_mean);
    EXPECT_EQ(x.eval_std, y.eval_std);
  }
  ASSERT_EQ(a.pool.stages(), b.pool.stages());
  for (std::size_t t = 0; t < a.pool.stages(); ++t)
    for (std::size_t l = 0; l < a.pool.partition(t).cell_count(); ++l) {
      const auto ca = a.pool.coefficients(t, l), cb = b.pool.coefficients(t, l);
      ASSERT_EQ(ca.size(), cb.size());
      EXPECT_EQ(std::memcmp(ca.data(), cb.data(), ca.size() * sizeof(double)), 0);
    }
}

TEST(Engine, InfeasibleStageReportsLp) {
  const auto model = market(4, 0.94);
  const ScenarioSet scen = simulate(model.uncertainty, 8, 7);
  SddpEngine engine(model, scen, small_config({}, 1));
  const double state[1] = {-1e9};
  const double xi[1] = {50.0};
  const double eta[1] = {0.0};
  try {
    engine.solve_stage(1, state, xi, eta, 0, 0);
    FAIL() << "expected an error";
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("stage 1 LP is infeasible"), std::string::npos);
  }
}

TEST(Engine, RejectsBadConfiguration) {
  const auto model = market(4, 0.94);
  const ScenarioSet scen = simulate(model.uncertainty, 8, 7);
  EXPECT_THROW(SddpEngine(model, scen, small_config({16}, 1)), ConfigError);
  EXPECT_THROW(SddpEngine(model, scen, small_config({2, 2}, 1)), ConfigError);
  const ScenarioSet short_set = simulate(market(2, 0.94).uncertainty, 8, 7);
  EXPECT_THROW(SddpEngine(model, short_set, small_config({}, 1)), ConfigError);
}

TEST(Engine, IterationCsvLayout) {
  const auto model = market(4, 0.94);
  SddpConfig cfg = small_config({2}, 2);
  cfg.eval_period = 2;
  const RunResult r = run(model, simulate(model.uncertainty, 40, 7), cfg);
  const auto path = std::filesystem::temp_directory_path() / "csddp_iterations_test.csv";
  write_iteration_csv(r.report, path, false);
  std::ifstream in(path);
  std::string header, first, second;
  std::getline(in, header);
  std::getline(in, first);
  std::getline(in, second);
  EXPECT_EQ(header, "iteration,z_lower,fwd_mean,fwd_std,eval_mean,eval_std,gap_rel,gap_conf,cuts_total,wall_ms");
  EXPECT_EQ(std::count(first.begin(), first.end(), ','), 9);
  EXPECT_NE(first.find(",,,,"), std::string::npos);  // no evaluation at iteration 1
  EXPECT_EQ(second.back(), ',');                      // wall time omitted
  std::filesystem::remove(path);
}
