#include <random>

#include <benchmark/benchmark.h>

#include "csddp/engine.hpp"
#include "csddp/lp_solver.hpp"
#include "csddp/model.hpp"
#include "csddp/partition.hpp"
#include "csddp/scenario.hpp"

using namespace csddp;

namespace {

const TimeGrid kGrid(1.0, 52);

// Market stage LP with an epigraph column and `cuts` random cut rows.
LinearProgram stage_with_cuts(int cuts) {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> slope(-80.0, 0.0), level(-3e7, -1e7);
  LinearProgram lp(3);
  lp.cost << 52.0, 0.0, 1.0;
  lp.lower << -45000.0, 0.0, -5e7;
  lp.upper << 60000.0, 360000.0, std::numeric_limits<double>::infinity();
  lp.eq_matrix = (Eigen::MatrixXd(1, 3) << -1.0, 1.0, 0.0).finished();
  lp.eq_rhs = Eigen::VectorXd::Constant(1, 180000.0);
  lp.ineq_matrix.resize(cuts, 3);
  lp.ineq_rhs.resize(cuts);
  for (int j = 0; j < cuts; ++j) {
    lp.ineq_matrix.row(j) << 0.0, slope(rng), -1.0;
    lp.ineq_rhs(j) = -level(rng);
  }
  return lp;
}

}  // namespace

static void BM_StageLp(benchmark::State& state) {
  const LinearProgram lp = stage_with_cuts(static_cast<int>(state.range(0)));
  SimplexSolver solver;
  for (auto _ : state) benchmark::DoNotOptimize(solver.solve(lp).objective);
}
BENCHMARK(BM_StageLp)->Arg(10)->Arg(100)->Arg(1000);

static void BM_FitCell(benchmark::State& state) {
  std::mt19937_64 rng(2);
  std::normal_distribution<double> n;
  const auto rows = static_cast<Eigen::Index>(state.range(0));
  Eigen::MatrixXd x(rows, 2), y(rows, 3);
  for (Eigen::Index r = 0; r < rows; ++r) {
    x.row(r) << 50.0 + 10.0 * n(rng), 22000.0 + 1000.0 * n(rng);
    y.row(r) << 1e6 + n(rng), n(rng), n(rng);
  }
  for (auto _ : state) benchmark::DoNotOptimize(fit_affine(x, y, RegressionMode::affine).coefficients(0, 0));
}
BENCHMARK(BM_FitCell)->Arg(250)->Arg(1000);

static void BM_Partition(benchmark::State& state) {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> n;
  Eigen::MatrixXd pts(8000, 2);
  for (Eigen::Index s = 0; s < pts.rows(); ++s) pts.row(s) << n(rng), n(rng);
  for (auto _ : state) benchmark::DoNotOptimize(Partition::build(pts, {8, 4}).cell_count());
}
BENCHMARK(BM_Partition);

static void BM_SimulateCombined(benchmark::State& state) {
  const MarkovProcessModel model(kGrid, OneFactorPriceModel::with_sinusoidal_curve(0.94, 0.29, kGrid),
                                 AR1DemandModel::with_sinusoidal_mean(0.9, 1000.0, kGrid));
  for (auto _ : state) benchmark::DoNotOptimize(simulate(model, 1000, 7, 1).values().data());
}
BENCHMARK(BM_SimulateCombined)->Unit(benchmark::kMillisecond);

static void BM_MarketIteration(benchmark::State& state) {
  const auto model =
      build_market_storage(StorageParams{}, OneFactorPriceModel::with_sinusoidal_curve(0.94, 0.29, kGrid));
  const ScenarioSet scen = simulate(model.uncertainty, 1000, 7, 1);
  SddpConfig cfg;
  cfg.splits = {10};
  cfg.threads = 1;
  SddpEngine engine(model, scen, cfg);
  std::size_t it = 0;
  for (auto _ : state) {
    ++it;
    const ScenarioSet paths = simulate(model.uncertainty, 10, it, 1);
    benchmark::DoNotOptimize(engine.backward_pass(engine.forward_pass(paths), it));
  }
}
BENCHMARK(BM_MarketIteration)->Unit(benchmark::kMillisecond)->Iterations(5);

BENCHMARK_MAIN();
