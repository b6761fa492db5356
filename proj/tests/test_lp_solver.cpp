#include <cmath>
#include <limits>
#include <random>

#include <gtest/gtest.h>

#include "csddp/lp_solver.hpp"
#include "oracles.hpp"

using namespace csddp;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

LinearProgram two_variable_example() {
  LinearProgram lp(2);
  lp.cost << -1.0, -2.0;
  lp.upper << 1.0, 1.0;
  lp.eq_matrix = Eigen::MatrixXd::Ones(1, 2);
  lp.eq_rhs = Eigen::VectorXd::Ones(1);
  return lp;
}

}  // namespace

TEST(Simplex, BoundOnly) {
  LinearProgram lp(1);
  lp.cost << -1.0;
  lp.upper << 1.0;
  const LpSolution sol = solve(lp);
  ASSERT_EQ(sol.status, LpStatus::optimal);
  EXPECT_DOUBLE_EQ(sol.x(0), 1.0);
  EXPECT_DOUBLE_EQ(sol.objective, -1.0);
  EXPECT_DOUBLE_EQ(sol.reduced_costs(0), -1.0);
}

TEST(Simplex, TwoVariableExample) {
  const LinearProgram lp = two_variable_example();
  const LpSolution sol = solve(lp);
  ASSERT_EQ(sol.status, LpStatus::optimal);
  EXPECT_NEAR(sol.x(0), 0.0, 1e-12);
  EXPECT_NEAR(sol.x(1), 1.0, 1e-12);
  EXPECT_NEAR(sol.objective, -2.0, 1e-12);
  EXPECT_NEAR(sol.pi(0), -2.0, 1e-12);
  EXPECT_LE(check_kkt(lp, sol).max(), 1e-9);
}

TEST(Simplex, Infeasible) {
  LinearProgram lp = two_variable_example();
  lp.eq_rhs(0) = 3.0;
  EXPECT_EQ(solve(lp).status, LpStatus::infeasible);
}

TEST(Simplex, Unbounded) {
  LinearProgram lp(2);
  lp.cost << -1.0, 0.0;
  lp.eq_matrix = (Eigen::MatrixXd(1, 2) << 1.0, -1.0).finished();
  lp.eq_rhs = Eigen::VectorXd::Zero(1);
  EXPECT_EQ(solve(lp).status, LpStatus::unbounded);
}

TEST(Simplex, FreeVariablesAndInequalities) {
  // min x + y  s.t.  x + y >= 2 (as -x - y <= -2), x - y <= 1, both free.
  LinearProgram lp(2);
  lp.cost << 1.0, 1.0;
  lp.lower.setConstant(-kInf);
  lp.upper.setConstant(kInf);
  lp.ineq_matrix = (Eigen::MatrixXd(2, 2) << -1, -1, 1, -1).finished();
  lp.ineq_rhs = (Eigen::VectorXd(2) << -2, 1).finished();
  const LpSolution sol = solve(lp);
  ASSERT_EQ(sol.status, LpStatus::optimal);
  EXPECT_NEAR(sol.objective, 2.0, 1e-12);
  EXPECT_NEAR(sol.rho(0), 1.0, 1e-12);
  EXPECT_LE(check_kkt(lp, sol).max(), 1e-9);
}

TEST(Simplex, KktDetectsInjectedViolations) {
  const LinearProgram lp = two_variable_example();
  LpSolution sol = solve(lp);
  LpSolution moved = sol;
  moved.x(0) += 1e-3;
  EXPECT_NEAR(check_kkt(lp, moved).primal, 1e-3, 1e-9);

  LinearProgram with_row = lp;
  with_row.ineq_matrix = (Eigen::MatrixXd(1, 2) << 0.0, 1.0).finished();
  with_row.ineq_rhs = (Eigen::VectorXd(1) << 1.0).finished();
  with_row.cost(1) = -3.0;
  LpSolution s2 = solve(with_row);
  ASSERT_EQ(s2.status, LpStatus::optimal);
  ASSERT_LE(check_kkt(with_row, s2).max(), 1e-9);
  s2.rho = -s2.rho;
  s2.rho(0) = s2.rho(0) == 0.0 ? -1.0 : s2.rho(0);
  EXPECT_GT(check_kkt(with_row, s2).dual_sign, 0.0);
}

TEST(Simplex, RejectsMalformedInput) {
  LinearProgram lp(2);
  lp.lower(0) = 2.0;
  lp.upper(0) = 1.0;
  EXPECT_THROW(solve(lp), ConfigError);
  LinearProgram nan(1);
  nan.cost(0) = std::nan("");
  EXPECT_THROW(solve(nan), ConfigError);
}

TEST(Simplex, MatchesVertexEnumeration) {
  std::mt19937_64 rng(20240601);
  SimplexSolver solver;
  int feasible = 0;
  for (int k = 0; k < 1000; ++k) {
    const LinearProgram lp = oracle::random_bounded_lp(rng);
    const auto expected = oracle::vertex_enumeration(lp);
    const LpSolution sol = solver.solve(lp);
    if (!expected) {
      EXPECT_EQ(sol.status, LpStatus::infeasible) << "instance " << k;
      continue;
    }
    ++feasible;
    ASSERT_EQ(sol.status, LpStatus::optimal) << "instance " << k << "\n" << dump_lp(lp);
    EXPECT_NEAR(sol.objective, *expected, 1e-9 * std::max(1.0, std::abs(*expected))) << "instance " << k;
    EXPECT_LE(check_kkt(lp, sol).max(), 1e-8) << "instance " << k;
  }
  EXPECT_GT(feasible, 800);
}

TEST(Simplex, DualIsFiniteDifferenceOfValue) {
  std::mt19937_64 rng(99);
  SimplexSolver solver;
  const double h = 1e-5;
  int checked = 0;
  for (int k = 0; k < 300 && checked < 100; ++k) {
    const LinearProgram lp = oracle::random_nonnegative_lp(rng, 2, 3);
    const LpSolution sol = solver.solve(lp);
    ASSERT_EQ(sol.status, LpStatus::optimal);
    for (Eigen::Index r = 0; r < lp.equalities(); ++r) {
      LinearProgram up = lp, down = lp;
      up.eq_rhs(r) += h;
      down.eq_rhs(r) -= h;
      const LpSolution su = solver.solve(up), sd = solver.solve(down);
      ASSERT_EQ(su.status, LpStatus::optimal);
      ASSERT_EQ(sd.status, LpStatus::optimal);
      // Skip kinks, where one-sided slopes differ.
      const double right = (su.objective - sol.objective) / h, left = (sol.objective - sd.objective) / h;
      if (std::abs(right - left) > 1e-6) continue;
      EXPECT_NEAR(sol.pi(r), 0.5 * (right + left), 1e-4);
      ++checked;
    }
    for (Eigen::Index r = 0; r < lp.inequalities(); ++r) {
      LinearProgram up = lp, down = lp;
      up.ineq_rhs(r) += h;
      down.ineq_rhs(r) -= h;
      const double right = (solver.solve(up).objective - sol.objective) / h;
      const double left = (sol.objective - solver.solve(down).objective) / h;
      if (std::abs(right - left) > 1e-6) continue;
      EXPECT_NEAR(-sol.rho(r), 0.5 * (right + left), 1e-4);
    }
  }
  EXPECT_GE(checked, 50);
}

TEST(Simplex, StrongDualityOnNonnegativeBounds) {
  std::mt19937_64 rng(7);
  SimplexSolver solver;
  for (int k = 0; k < 200; ++k) {
    const LinearProgram lp = oracle::random_nonnegative_lp(rng, 2, 4);
    const LpSolution sol = solver.solve(lp);
    ASSERT_EQ(sol.status, LpStatus::optimal);
    const double dual = lp.eq_rhs.dot(sol.pi) - lp.ineq_rhs.dot(sol.rho);
    EXPECT_NEAR(sol.objective, dual, 1e-8 * std::max(1.0, std::abs(sol.objective)));
    EXPECT_GE(sol.rho.minCoeff(), -1e-10);
  }
}

TEST(Simplex, LazyRowsGiveSameAnswer) {
  std::mt19937_64 rng(31);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  SimplexOptions eager;
  eager.lazy_row_threshold = 1000;
  SimplexSolver lazy_solver, eager_solver(eager);
  for (int k = 0; k < 50; ++k) {
    // Epigraph of many affine cuts over a box, the shape produced by the engine.
    LinearProgram lp(3);
    lp.cost << u(rng), u(rng), 1.0;
    lp.lower << -1.0, -1.0, -kInf;
    lp.upper << 1.0, 1.0, kInf;
    const int cuts = 40;
    lp.ineq_matrix.resize(cuts, 3);
    lp.ineq_rhs.resize(cuts);
    for (int j = 0; j < cuts; ++j) {
      lp.ineq_matrix.row(j) << 2 * u(rng), 2 * u(rng), -1.0;
      lp.ineq_rhs(j) = -u(rng);
    }
    const LpSolution a = lazy_solver.solve(lp), b = eager_solver.solve(lp);
    ASSERT_EQ(a.status, LpStatus::optimal);
    ASSERT_EQ(b.status, LpStatus::optimal);
    EXPECT_NEAR(a.objective, b.objective, 1e-10);
    EXPECT_LE(check_kkt(lp, a).max(), 1e-8);
  }
}

TEST(Simplex, DeterministicAcrossCalls) {
  std::mt19937_64 rng(5);
  const LinearProgram lp = oracle::random_bounded_lp(rng);
  SimplexSolver a, b;
  b.solve(oracle::random_bounded_lp(rng));
  const LpSolution sa = a.solve(lp), sb = b.solve(lp);
  EXPECT_EQ(sa.status, sb.status);
  if (sa.status == LpStatus::optimal) {
    EXPECT_EQ(sa.objective, sb.objective);
    EXPECT_EQ(sa.x, sb.x);
  }
}
