#include "csddp/engine.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <limits>
#include <numeric>
#include <sstream>
#include <string>

#include <spdlog/spdlog.h>

#include "csddp/errors.hpp"
#include "csddp/parallel.hpp"
#include "csddp/random.hpp"

namespace csddp {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

bool same_bits(std::span<const double> a, std::span<const double> b) {
  return a.size() == b.size() && std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0;
}

std::pair<double, double> mean_and_std(const std::vector<double>& v) {
  if (v.empty()) return {0.0, 0.0};
  double sum = 0.0;
  for (double x : v) sum += x;
  const double mean = sum / static_cast<double>(v.size());
  if (v.size() < 2) return {mean, 0.0};
  double ss = 0.0;
  for (double x : v) ss += (x - mean) * (x - mean);
  return {mean, std::sqrt(ss / static_cast<double>(v.size() - 1))};
}

double elapsed_ms(std::chrono::steady_clock::time_point since) {
  return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - since).count();
}

}  // namespace

void SddpConfig::validate(const ModelInstance& model) const {
  const std::size_t m = model.uncertainty.dimension();
  if (eval_period < 1) throw ConfigError("sddp: eval_period must be >= 1");
  if (eval_samples < 2) throw ConfigError("sddp: eval_samples must be >= 2");
  if (!(rel_gap > 0.0 && rel_gap < 1.0)) throw ConfigError("sddp: rel_gap must lie in (0, 1)");
  if (max_iterations < 1) throw ConfigError("sddp: max_iterations must be >= 1");
  if (!(confidence > 0.0)) throw ConfigError("sddp: confidence multiplier must be > 0");
  if (model.mode == ModelMode::augmented && inner_samples < 1) throw ConfigError("sddp: inner_samples must be >= 1");
  if (!splits.empty() && splits.size() != m)
    throw ConfigError("sddp: " + std::to_string(splits.size()) + " split counts given for a " + std::to_string(m) +
                      "-dimensional Markov state");
  for (std::size_t s : splits)
    if (s < 1) throw ConfigError("sddp: split counts must be >= 1");
  if (model.stage_count() < 1) throw ConfigError("sddp: model has no stages");
}

std::size_t SddpConfig::cells() const {
  std::size_t l = 1;
  for (std::size_t s : splits) l *= s;
  return l;
}

StopDecision stopping_check(double z_lower, double eval_mean, double eval_std, std::size_t eval_samples,
                            const SddpConfig& config) {
  StopDecision d;
  const double scale = std::abs(eval_mean) > 0.0 ? std::abs(eval_mean) : 1.0;
  const double se = eval_std / std::sqrt(static_cast<double>(std::max<std::size_t>(eval_samples, 1)));
  d.gap_rel = (eval_mean - z_lower) / scale;
  d.gap_conf = eval_mean + config.confidence * se - z_lower;
  d.stop = d.gap_rel < config.rel_gap;
  // The floor keeps round-off from flagging deterministic runs, where se is ~0.
  d.overshoot = z_lower - eval_mean > 3.0 * se + 1e-9 * scale;
  return d;
}

const char* to_string(RunStatus status) { return status == RunStatus::converged ? "converged" : "max_iterations"; }

std::vector<std::shared_ptr<const Partition>> build_stage_partitions(const ModelInstance& model,
                                                                     const ScenarioSet& scenarios,
                                                                     const SddpConfig& config) {
  const std::size_t T = model.stage_count();
  const std::size_t m = model.uncertainty.dimension();
  std::vector<std::size_t> splits = config.splits.empty() ? std::vector<std::size_t>(m, 1) : config.splits;
  std::vector<std::shared_ptr<const Partition>> parts;
  for (std::size_t t = 0; t + 1 < T; ++t) {
    if (t == 0 || model.mode == ModelMode::augmented)
      parts.push_back(std::make_shared<const Partition>(Partition::single_cell(m, scenarios.samples())));
    else
      parts.push_back(std::make_shared<const Partition>(Partition::build(scenarios.date_points(t), splits)));
  }
  return parts;
}

struct SddpEngine::Worker {
  SimplexSolver solver;
  LinearProgram lp;
  Eigen::VectorXd intercepts;
  Eigen::MatrixXd slopes;
};

SddpEngine::SddpEngine(const ModelInstance& model, const ScenarioSet& scenarios, SddpConfig config)
    : model_(model), scenarios_(scenarios), config_(std::move(config)) {
  config_.validate(model_);
  stages_ = model_.stage_count();
  const std::size_t m = model_.uncertainty.dimension();
  if (scenarios_.dimension() != m)
    throw ConfigError("sddp: scenario dimension " + std::to_string(scenarios_.dimension()) +
                      " does not match the model (" + std::to_string(m) + ")");
  if (scenarios_.dates() < stages_)
    throw ConfigError("sddp: scenario set has " + std::to_string(scenarios_.dates()) + " dates, model needs " +
                      std::to_string(stages_));
  if (scenarios_.samples() < 1) throw ConfigError("sddp: empty scenario set");

  // Seed cuts: the model's value bound taken tangent at the mean of each cell's build points.
  auto parts = build_stage_partitions(model_, scenarios_, config_);
  const std::vector<double> xi0 = model_.uncertainty.initial_state();
  auto seed = [&](std::size_t t, std::size_t cell, std::span<double> coef) {
    std::vector<double> at(m, 0.0);
    const auto& members = parts[t]->cell_members()[cell];
    if (t == 0 || members.empty()) {
      at = xi0;
    } else {
      for (std::size_t s : members)
        for (std::size_t k = 0; k < m; ++k) at[k] += scenarios_.at(s, t, k);
      for (double& a : at) a /= static_cast<double>(members.size());
    }
    model_.stages[t].value_bound(at, coef);
  };
  pool_ = CutPool(parts, static_cast<std::size_t>(model_.state_dim()), m, seed);

  threads_ = resolve_threads(config_.threads);
  for (std::size_t w = 0; w < threads_; ++w) workers_.push_back(std::make_unique<Worker>());
}

SddpEngine::~SddpEngine() = default;

SddpEngine::StageSolve SddpEngine::solve_stage(std::size_t t, std::span<const double> state,
                                               std::span<const double> xi, std::span<const double> innovation,
                                               std::size_t cell, std::size_t worker) {
  const StageTemplate& st = model_.stages.at(t);
  Worker& w = *workers_.at(worker);
  const bool epigraph = t + 1 < stages_;
  const Eigen::Index n = st.variables();
  LinearProgram& lp = w.lp;
  instantiate_stage_into(st, state, xi, innovation, epigraph ? 1 : 0, lp);

  if (epigraph) {
    lp.cost(n) = 1.0;
    lp.lower(n) = st.value_lb;
    pool_.evaluate(t, cell, xi, w.intercepts, w.slopes);
    const Eigen::Index rows = w.intercepts.size();
    lp.ineq_matrix.setZero(rows, n + 1);
    lp.ineq_rhs.resize(rows);
    for (Eigen::Index j = 0; j < rows; ++j) {
      for (std::size_t k = 0; k < st.state_vars.size(); ++k)
        lp.ineq_matrix(j, st.state_vars[k]) = w.slopes(j, static_cast<Eigen::Index>(k));
      lp.ineq_matrix(j, n) = -1.0;
      lp.ineq_rhs(j) = -w.intercepts(j);
    }
  }

  const LpSolution sol = w.solver.solve(lp);
  if (sol.status != LpStatus::optimal)
    throw Error("sddp: stage " + std::to_string(t) + " LP is " + to_string(sol.status) + "\n" + dump_lp(lp));

  StageSolve out;
  out.value = sol.objective;
  out.stage_cost = lp.cost.head(n).dot(sol.x.head(n));
  out.subgradient = -(st.B.transpose() * sol.pi);
  out.next_state.resize(st.state_vars.size());
  for (std::size_t k = 0; k < st.state_vars.size(); ++k) out.next_state[k] = sol.x(st.state_vars[k]);
  return out;
}

ForwardResult SddpEngine::forward_pass(const ScenarioSet& paths, bool keep_trials) {
  const std::size_t P = paths.samples();
  const std::size_t m = paths.dimension();
  const bool augmented = model_.mode == ModelMode::augmented;
  if (m != model_.uncertainty.dimension()) throw ConfigError("sddp: forward paths have the wrong dimension");
  if (paths.dates() < stages_) throw ConfigError("sddp: forward paths are shorter than the horizon");

  ForwardResult result;
  result.costs.assign(P, 0.0);
  if (keep_trials) {
    result.trials.assign(stages_ - 1, std::vector<TrialPoint>(P));
  }
  std::vector<std::size_t> unvisited(P, 0);

  const std::vector<double> init(model_.initial_state.data(), model_.initial_state.data() + model_.initial_state.size());
  const std::vector<double> zeros(m, 0.0);
  std::optional<StageSolve> first;
  if (P > 0) first = solve_stage(0, init, paths.state(0, 0), zeros, 0, 0);

  parallel_for(P, threads_, [&](std::size_t begin, std::size_t end, std::size_t worker) {
    std::vector<double> eta(m, 0.0);
    for (std::size_t p = begin; p < end; ++p) {
      std::vector<double> state = init;
      double cost = 0.0;
      for (std::size_t t = 0; t < stages_; ++t) {
        const auto xi = paths.state(p, t);
        const bool has_cuts = t + 1 < stages_;
        const std::size_t cell = has_cuts ? pool_.partition(t).locate(xi) : 0;
        StageSolve s;
        if (t == 0 && same_bits(xi, paths.state(0, 0))) {
          s = *first;
        } else {
          std::fill(eta.begin(), eta.end(), 0.0);
          if (augmented && t > 0) model_.uncertainty.innovation_between(t - 1, paths.state(p, t - 1), xi, eta);
          s = solve_stage(t, state, xi, eta, cell, worker);
        }
        if (has_cuts && pool_.cut_count(t, cell) == 1) ++unvisited[p];
        cost += s.stage_cost;
        if (keep_trials && has_cuts) result.trials[t][p] = TrialPoint{t, cell, p, s.next_state};
        state = std::move(s.next_state);
      }
      result.costs[p] = cost;
    }
  });

  for (std::size_t u : unvisited) unvisited_hits_ += u;
  std::tie(result.mean, result.std) = mean_and_std(result.costs);
  return result;
}

void SddpEngine::backward_conditional(std::size_t t, const std::vector<TrialPoint>& trials, std::size_t iteration) {
  const Partition& part = pool_.partition(t);
  const std::size_t m = model_.uncertainty.dimension();
  const std::size_t d = pool_.state_dim();
  const bool next_has_cuts = t + 2 < stages_;

  // Unique (cell, state) trials in path order.
  std::vector<const TrialPoint*> unique;
  for (const auto& tr : trials) {
    const bool seen = std::any_of(unique.begin(), unique.end(), [&](const TrialPoint* u) {
      return u->cell == tr.cell && same_bits(u->state, tr.state);
    });
    if (!seen) unique.push_back(&tr);
  }

  std::vector<std::size_t> offset(unique.size() + 1, 0);
  for (std::size_t u = 0; u < unique.size(); ++u)
    offset[u + 1] = offset[u] + part.cell_members()[unique[u]->cell].size();
  const std::size_t tasks = offset.back();
  std::vector<double> responses(tasks * (1 + d));

  const std::vector<double> zeros(m, 0.0);
  const std::vector<std::size_t>* next_cells =
      next_has_cuts ? &pool_.partition(t + 1).sample_cells() : nullptr;

  parallel_for(tasks, threads_, [&](std::size_t begin, std::size_t end, std::size_t worker) {
    std::size_t u = static_cast<std::size_t>(std::upper_bound(offset.begin(), offset.end(), begin) - offset.begin()) - 1;
    for (std::size_t task = begin; task < end; ++task) {
      while (task >= offset[u + 1]) ++u;
      const std::size_t s = part.cell_members()[unique[u]->cell][task - offset[u]];
      const auto xi = scenarios_.state(s, t + 1);
      const std::size_t cell = next_has_cuts ? (*next_cells)[s] : 0;
      const StageSolve r = solve_stage(t + 1, unique[u]->state, xi, zeros, cell, worker);
      double* out = responses.data() + task * (1 + d);
      out[0] = r.value;
      for (std::size_t k = 0; k < d; ++k) out[1 + k] = r.subgradient(static_cast<Eigen::Index>(k));
    }
  });

  const RegressionMode mode = t == 0 ? RegressionMode::constant : config_.regression;
  std::vector<double> block(pool_.block_size());
  for (std::size_t u = 0; u < unique.size(); ++u) {
    const auto& members = part.cell_members()[unique[u]->cell];
    const auto n = static_cast<Eigen::Index>(members.size());
    Eigen::MatrixXd X(n, static_cast<Eigen::Index>(m));
    Eigen::MatrixXd Y(n, static_cast<Eigen::Index>(1 + d));
    for (Eigen::Index r = 0; r < n; ++r) {
      const auto xi = scenarios_.state(members[static_cast<std::size_t>(r)], t);
      for (std::size_t q = 0; q < m; ++q) X(r, static_cast<Eigen::Index>(q)) = xi[q];
      const double* resp = responses.data() + (offset[u] + static_cast<std::size_t>(r)) * (1 + d);
      for (std::size_t k = 0; k <= d; ++k) Y(r, static_cast<Eigen::Index>(k)) = resp[k];
    }
    const AffineFit fit = fit_affine(X, Y, mode);
    if (fit.degenerate) ++constant_fallbacks_;

    // alpha(xi) = v(xi) - g(xi)' xbar, beta(xi) = g(xi).
    const std::size_t w = 1 + m;
    std::fill(block.begin(), block.end(), 0.0);
    for (std::size_t r = 0; r <= d; ++r)
      for (std::size_t q = 0; q < static_cast<std::size_t>(fit.coefficients.cols()); ++q)
        block[r * w + q] = fit.coefficients(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(q));
    for (std::size_t k = 0; k < d; ++k)
      for (std::size_t q = 0; q < w; ++q) block[q] -= unique[u]->state[k] * block[(1 + k) * w + q];
    pool_.add(t, unique[u]->cell, block, CutOrigin{iteration, unique[u]->path});
  }
}

void SddpEngine::backward_augmented(std::size_t t, const std::vector<TrialPoint>& trials, std::size_t iteration) {
  const std::size_t m = model_.uncertainty.dimension();
  const std::size_t d = pool_.state_dim();
  const std::size_t N = config_.inner_samples;
  const std::uint64_t inner_seed = derive_seed(config_.seed, 3, 0);

  std::vector<const TrialPoint*> unique;
  for (const auto& tr : trials) {
    const bool seen =
        std::any_of(unique.begin(), unique.end(), [&](const TrialPoint* u) { return same_bits(u->state, tr.state); });
    if (!seen) unique.push_back(&tr);
  }

  const std::size_t tasks = unique.size() * N;
  std::vector<double> responses(tasks * (1 + d));
  const std::vector<double> xi(m, 0.0);
  parallel_for(tasks, threads_, [&](std::size_t begin, std::size_t end, std::size_t worker) {
    std::vector<double> eta(m);
    for (std::size_t task = begin; task < end; ++task) {
      const std::size_t u = task / N;
      const std::size_t j = task % N;
      for (std::size_t k = 0; k < m; ++k) eta[k] = keyed_normal(inner_seed, j, t + 1, k);
      const StageSolve r = solve_stage(t + 1, unique[u]->state, xi, eta, 0, worker);
      double* out = responses.data() + task * (1 + d);
      out[0] = r.value;
      for (std::size_t k = 0; k < d; ++k) out[1 + k] = r.subgradient(static_cast<Eigen::Index>(k));
    }
  });

  const std::size_t w = 1 + m;
  std::vector<double> block(pool_.block_size());
  for (std::size_t u = 0; u < unique.size(); ++u) {
    std::vector<double> avg(1 + d, 0.0);
    for (std::size_t j = 0; j < N; ++j)
      for (std::size_t k = 0; k <= d; ++k) avg[k] += responses[(u * N + j) * (1 + d) + k];
    for (double& a : avg) a /= static_cast<double>(N);
    std::fill(block.begin(), block.end(), 0.0);
    block[0] = avg[0];
    for (std::size_t k = 0; k < d; ++k) {
      block[(1 + k) * w] = avg[1 + k];
      block[0] -= avg[1 + k] * unique[u]->state[k];
    }
    pool_.add(t, 0, block, CutOrigin{iteration, unique[u]->path});
  }
}

double SddpEngine::backward_pass(const ForwardResult& forward, std::size_t iteration) {
  if (forward.trials.size() + 1 != stages_) throw ConfigError("sddp: forward result carries no trial points");
  for (std::size_t t = stages_ - 1; t-- > 0;) {
    if (model_.mode == ModelMode::augmented)
      backward_augmented(t, forward.trials[t], iteration);
    else
      backward_conditional(t, forward.trials[t], iteration);
  }
  return lower_bound();
}

double SddpEngine::lower_bound() {
  const std::vector<double> init(model_.initial_state.data(), model_.initial_state.data() + model_.initial_state.size());
  const std::vector<double> xi0 = model_.uncertainty.initial_state();
  const std::vector<double> zeros(xi0.size(), 0.0);
  return solve_stage(0, init, xi0, zeros, 0, 0).value;
}

std::pair<double, double> SddpEngine::evaluate_policy(std::size_t samples, std::uint64_t seed) {
  const ScenarioSet paths = simulate(model_.uncertainty, samples, seed, threads_);
  const ForwardResult fr = forward_pass(paths, false);
  return {fr.mean, fr.std};
}

RunResult SddpEngine::run() {
  const auto start = std::chrono::steady_clock::now();
  RunReport report;
  double previous = -kInf;

  for (std::size_t it = 1; it <= config_.max_iterations; ++it) {
    const ScenarioSet paths =
        simulate(model_.uncertainty, config_.forward_paths(), derive_seed(config_.seed, 1, it), threads_);
    const ForwardResult fr = forward_pass(paths, true);
    const double z = backward_pass(fr, it);
    if (z < previous - 1e-9 * std::max(1.0, std::abs(previous))) {
      report.monotone = false;
      spdlog::warn("sddp: lower bound decreased at iteration {} ({} -> {})", it, previous, z);
    }
    previous = z;

    IterationRecord rec;
    rec.iteration = it;
    rec.z_lower = z;
    rec.fwd_mean = fr.mean;
    rec.fwd_std = fr.std;
    bool stop = false;
    if (it % config_.eval_period == 0 || it == config_.max_iterations) {
      const auto [mean, sd] = evaluate_policy(config_.eval_samples, derive_seed(config_.seed, 2, it));
      const StopDecision dec = stopping_check(z, mean, sd, config_.eval_samples, config_);
      rec.eval_mean = mean;
      rec.eval_std = sd;
      rec.gap_rel = dec.gap_rel;
      rec.gap_conf = dec.gap_conf;
      if (dec.overshoot) {
        ++report.overshoot_warnings;
        spdlog::warn("sddp: lower bound {} exceeds the policy estimate {} by more than 3 standard errors", z, mean);
      }
      spdlog::info("sddp: iteration {} lower {:.6e} estimate {:.6e} (sd {:.4e}) gap {:.3e}", it, z, mean, sd,
                   dec.gap_rel);
      stop = dec.stop;
    } else {
      spdlog::debug("sddp: iteration {} lower {:.6e} forward {:.6e}", it, z, fr.mean);
    }
    rec.cuts_total = pool_.total_cuts();
    rec.wall_ms = elapsed_ms(start);
    report.iterations.push_back(rec);
    if (stop) {
      report.status = RunStatus::converged;
      break;
    }
  }

  const IterationRecord& last = report.iterations.back();
  report.z_lower = last.z_lower;
  report.eval_mean = last.eval_mean.value_or(0.0);
  report.eval_std = last.eval_std.value_or(0.0);
  report.gap_rel = last.gap_rel.value_or(0.0);
  report.gap_conf = last.gap_conf.value_or(0.0);
  for (std::size_t t = 0; t < pool_.stages(); ++t) report.cuts_per_stage.push_back(pool_.stage_cut_count(t));
  report.constant_fallbacks = constant_fallbacks_;
  report.unvisited_cell_hits = unvisited_hits_;
  report.wall_ms = elapsed_ms(start);
  return RunResult{std::move(report), pool_};
}

RunResult run(const ModelInstance& model, const ScenarioSet& scenarios, const SddpConfig& config) {
  SddpEngine engine(model, scenarios, config);
  return engine.run();
}

void write_iteration_csv(const RunReport& report, const std::filesystem::path& path, bool include_wall_time) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << "iteration,z_lower,fwd_mean,fwd_std,eval_mean,eval_std,gap_rel,gap_conf,cuts_total,wall_ms\n";
  out << std::setprecision(17);
  auto opt = [&](const std::optional<double>& v) {
    if (v) out << *v;
  };
  for (const auto& r : report.iterations) {
    out << r.iteration << ',' << r.z_lower << ',' << r.fwd_mean << ',' << r.fwd_std << ',';
    opt(r.eval_mean);
    out << ',';
    opt(r.eval_std);
    out << ',';
    opt(r.gap_rel);
    out << ',';
    opt(r.gap_conf);
    out << ',' << r.cuts_total << ',';
    if (include_wall_time) out << r.wall_ms;
    out << '\n';
  }
  if (!out) throw IoError("failed writing " + path.string());
}

}  // namespace csddp
