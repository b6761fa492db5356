#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "csddp/cut_pool.hpp"
#include "csddp/lp_solver.hpp"
#include "csddp/model.hpp"
#include "csddp/partition.hpp"
#include "csddp/scenario.hpp"

namespace csddp {

struct SddpConfig {
  /// Forward paths per iteration; 0 means the cell count of the partition.
  std::size_t forward_count = 0;
  std::size_t eval_period = 10;
  std::size_t eval_samples = 20000;
  double rel_gap = 1e-3;
  std::size_t max_iterations = 1000;
  double confidence = 1.96;
  std::uint64_t seed = 1;
  /// Inner samples per trial in augmented mode.
  std::size_t inner_samples = 2000;
  /// Strips per Markov-state component; empty means a single cell.
  std::vector<std::size_t> splits;
  RegressionMode regression = RegressionMode::affine;
  std::size_t threads = 0;

  void validate(const ModelInstance& model) const;
  std::size_t cells() const;
  std::size_t forward_paths() const { return forward_count ? forward_count : cells(); }
};

struct TrialPoint {
  std::size_t stage = 0;
  std::size_t cell = 0;
  std::size_t path = 0;
  std::vector<double> state;
};

struct ForwardResult {
  /// trials[t] holds one trial per path for every stage that carries cuts.
  std::vector<std::vector<TrialPoint>> trials;
  std::vector<double> costs;
  double mean = 0.0;
  double std = 0.0;
};

struct StopDecision {
  bool stop = false;
  double gap_rel = 0.0;
  double gap_conf = 0.0;
  /// Lower bound above the estimate by more than 3 standard errors.
  bool overshoot = false;
};

StopDecision stopping_check(double z_lower, double eval_mean, double eval_std, std::size_t eval_samples,
                            const SddpConfig& config);

struct IterationRecord {
  std::size_t iteration = 0;
  double z_lower = 0.0;
  double fwd_mean = 0.0;
  double fwd_std = 0.0;
  std::optional<double> eval_mean;
  std::optional<double> eval_std;
  std::optional<double> gap_rel;
  std::optional<double> gap_conf;
  std::size_t cuts_total = 0;
  double wall_ms = 0.0;
};

enum class RunStatus { converged, max_iterations };

const char* to_string(RunStatus status);

struct RunReport {
  std::vector<IterationRecord> iterations;
  RunStatus status = RunStatus::max_iterations;
  double z_lower = 0.0;
  double eval_mean = 0.0;
  double eval_std = 0.0;
  double gap_rel = 0.0;
  double gap_conf = 0.0;
  std::vector<std::size_t> cuts_per_stage;
  /// Regressions that fell back to constants (too few or collinear samples).
  std::size_t constant_fallbacks = 0;
  /// Forward visits of cells that only hold the trivial cut.
  std::size_t unvisited_cell_hits = 0;
  std::size_t overshoot_warnings = 0;
  /// Lower bound never decreased by more than round-off.
  bool monotone = true;
  double wall_ms = 0.0;
};

struct RunResult {
  RunReport report;
  CutPool pool;
};

/// Conditional-cut SDDP (and augmented-state SDDP with constant cuts).
///
/// The backward scenario set fixes one partition per decision stage; stage 0
/// always has a single cell since xi_0 is deterministic. Forward and evaluation
/// paths are drawn fresh from the model with per-iteration seeds.
class SddpEngine {
 public:
  /// Keeps references to `model` and `scenarios`; both must outlive the engine.
  SddpEngine(const ModelInstance& model, const ScenarioSet& scenarios, SddpConfig config);
  SddpEngine(const ModelInstance&, ScenarioSet&&, SddpConfig) = delete;
  SddpEngine(ModelInstance&&, const ScenarioSet&, SddpConfig) = delete;
  SddpEngine(ModelInstance&&, ScenarioSet&&, SddpConfig) = delete;
  ~SddpEngine();
  SddpEngine(const SddpEngine&) = delete;
  SddpEngine& operator=(const SddpEngine&) = delete;

  const CutPool& pool() const { return pool_; }
  CutPool& pool() { return pool_; }
  const SddpConfig& config() const { return config_; }

  /// Simulates the current policy on the given paths, recording trial points.
  ForwardResult forward_pass(const ScenarioSet& paths, bool keep_trials = true);

  /// Adds cuts at the given trials, stage T-2 down to 0, and returns the new lower bound.
  double backward_pass(const ForwardResult& forward, std::size_t iteration);

  /// Stage-0 LP value.
  double lower_bound();

  /// Mean and standard deviation of the policy cost on `samples` fresh paths.
  std::pair<double, double> evaluate_policy(std::size_t samples, std::uint64_t seed);

  RunResult run();

  struct StageSolve {
    double value = 0.0;           ///< stage cost plus epigraph variable
    double stage_cost = 0.0;      ///< c'x only
    Eigen::VectorXd subgradient;  ///< -B' pi
    std::vector<double> next_state;
  };

  /// Solves decision stage t at incoming state and realization, with the cuts of `cell`
  /// (ignored at the last stage). Throws on a non-optimal LP, with a dump of the problem.
  StageSolve solve_stage(std::size_t t, std::span<const double> state, std::span<const double> xi,
                         std::span<const double> innovation, std::size_t cell, std::size_t worker);

  std::size_t constant_fallbacks() const { return constant_fallbacks_; }

 private:
  struct Worker;

  const ModelInstance& model_;
  const ScenarioSet& scenarios_;
  SddpConfig config_;
  std::size_t threads_;
  std::size_t stages_;
  CutPool pool_;
  std::vector<std::unique_ptr<Worker>> workers_;
  std::size_t constant_fallbacks_ = 0;
  std::size_t unvisited_hits_ = 0;

  void backward_conditional(std::size_t t, const std::vector<TrialPoint>& trials, std::size_t iteration);
  void backward_augmented(std::size_t t, const std::vector<TrialPoint>& trials, std::size_t iteration);
};

/// Builds the per-stage partitions used by the engine (stage 0 and augmented mode: one cell).
std::vector<std::shared_ptr<const Partition>> build_stage_partitions(const ModelInstance& model,
                                                                     const ScenarioSet& scenarios,
                                                                     const SddpConfig& config);

RunResult run(const ModelInstance& model, const ScenarioSet& scenarios, const SddpConfig& config);

/// iteration,z_lower,fwd_mean,fwd_std,eval_mean,eval_std,gap_rel,gap_conf,cuts_total,wall_ms
void write_iteration_csv(const RunReport& report, const std::filesystem::path& path, bool include_wall_time = true);

}  // namespace csddp
