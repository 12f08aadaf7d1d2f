#pragma once

// REINFORCE training of the pruning model.
//
// For a formula with clauses C and a sampled mask keeping C', the loss is 1
// when C' is satisfiable and (|C'|/|C|)^2 otherwise. The gradient of the
// expected loss is estimated as the batch mean of loss * grad log p(mask).

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <numeric>
#include <optional>
#include <ostream>
#include <random>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include "musprune/cnf.hpp"
#include "musprune/graph.hpp"
#include "musprune/model.hpp"
#include "musprune/parallel.hpp"
#include "musprune/random.hpp"
#include "musprune/sat.hpp"

namespace musprune {

class TrainingError : public Error {
 public:
  using Error::Error;
};

inline double prune_loss(std::size_t original_clauses, std::size_t kept_clauses,
                         bool pruned_satisfiable) {
  if (kept_clauses > original_clauses) throw Error("pruned formula has more clauses");
  if (pruned_satisfiable || original_clauses == 0) return 1.0;
  const double r = static_cast<double>(kept_clauses) / static_cast<double>(original_clauses);
  return r * r;
}

inline double prune_loss(const CnfFormula& original, const CnfFormula& pruned,
                         bool pruned_satisfiable) {
  return prune_loss(original.num_clauses(), pruned.num_clauses(), pruned_satisfiable);
}

// ---------------------------------------------------------------------------
// Adam

struct AdamState {
  ModelParams m, v;
  std::int64_t t = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  std::int64_t skipped = 0;

  static AdamState for_params(const ModelParams& p) {
    AdamState s;
    s.m = p.zeros_like();
    s.v = p.zeros_like();
    return s;
  }
};

/// One Adam step on `params`. A non-finite gradient skips the step (state and
/// parameters untouched) and returns false.
inline bool adam_update(ModelParams& params, AdamState& state, const ParamGrads& grads,
                        double lr) {
  if (!grads.all_finite()) {
    ++state.skipped;
    return false;
  }
  auto p = params.tensors();
  auto m = state.m.tensors();
  auto v = state.v.tensors();
  std::vector<const Matrix*> g;
  grads.for_each_tensor([&](const Matrix& x) { g.push_back(&x); });
  if (p.size() != g.size() || p.size() != m.size()) throw Error("Adam: shape mismatch");
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p[i]->rows() != g[i]->rows() || p[i]->cols() != g[i]->cols()) {
      throw Error("Adam: shape mismatch");
    }
  }
  ++state.t;
  const double c1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.t));
  const double c2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.t));
  for (std::size_t i = 0; i < p.size(); ++i) {
    m[i]->array() = state.beta1 * m[i]->array() + (1 - state.beta1) * g[i]->array();
    v[i]->array() = state.beta2 * v[i]->array() + (1 - state.beta2) * g[i]->array().square();
    p[i]->array() -= lr * (m[i]->array() / c1) / ((v[i]->array() / c2).sqrt() + state.eps);
  }
  return true;
}

// ---------------------------------------------------------------------------
// Examples and the estimator

/// A training formula, verified unsatisfiable once, with its graph cached.
struct TrainingExample {
  CnfFormula formula;
  LiteralClauseGraph graph;
  GraphOperators ops;
  /// When set, used instead of freshly sampled random features.
  std::optional<Matrix> fixed_features;

  Matrix features(int random_dim, std::uint64_t seed) const {
    return fixed_features ? *fixed_features : make_input_features(graph, random_dim, seed);
  }
};

inline TrainingExample make_training_example(CnfFormula formula, SatEngine& engine,
                                             const std::string& name = "") {
  if (engine.is_satisfiable(formula)) {
    throw TrainingError("training formula " + (name.empty() ? std::string("<unnamed>") : name) +
                        " is satisfiable");
  }
  TrainingExample ex{std::move(formula), {}, {}, std::nullopt};
  ex.graph = build_lcg(ex.formula);
  ex.ops = make_operators(ex.graph);
  return ex;
}

struct TrainConfig {
  int batch_size = 32;
  double learning_rate = 1e-4;
  std::uint64_t max_formulas = 2'000'000;
  int samples_per_formula = 1;
  /// Evaluate every this many steps.
  int eval_every = 10;
  /// Stop after this many evaluations without relative improvement > min_delta.
  int early_stop_window = 10;
  double min_delta = 0.01;
  /// Monte Carlo samples per eval formula (fixed seeds across evaluations).
  int eval_samples = 4;
  bool use_baseline = false;
  double baseline_decay = 0.9;
  int workers = 1;
  std::uint64_t seed = 0;

  void validate() const {
    if (batch_size < 1 || samples_per_formula < 1 || eval_every < 1 || early_stop_window < 1 ||
        eval_samples < 1 || workers < 1) {
      throw Error("training counts must be positive");
    }
    if (!(learning_rate > 0) || max_formulas == 0) throw Error("learning rate and budget must be positive");
    if (!(min_delta >= 0)) throw Error("min_delta must be >= 0");
  }
};

struct TrainMetrics {
  std::int64_t step = 0;
  double mean_loss = 0.0;
  /// Mean fraction of clauses removed, over samples whose pruned formula is UNSAT.
  double pruned_fraction = 0.0;
  double sat_failure_rate = 0.0;
  double grad_norm = 0.0;
  std::uint64_t sat_calls = 0;
  bool update_skipped = false;
};

/// Outcome of one sampled mask.
struct SampleResult {
  KeepMask keep;
  bool satisfiable = false;
  double loss = 1.0;
  std::size_t kept = 0;
};

/// Samples one mask for `ex`, prunes and issues exactly one SAT call.
inline SampleResult evaluate_mask(const TrainingExample& ex, KeepMask keep, SatEngine& engine) {
  SampleResult r;
  auto pruned = prune_clauses(ex.formula, keep);
  r.keep = std::move(keep);
  r.kept = pruned.formula.num_clauses();
  r.satisfiable = engine.is_satisfiable(pruned.formula);
  r.loss = prune_loss(ex.formula.num_clauses(), r.kept, r.satisfiable);
  return r;
}

struct GradientEstimate {
  ParamGrads grads;
  std::vector<SampleResult> samples;  // formula-major, then sample
  std::uint64_t sat_calls = 0;
};

/// sum over batch and samples of (loss - baseline) * grad log p, divided by
/// the number of samples. Seeds: features derive_seed(seed, i, 2s), masks
/// derive_seed(seed, i, 2s + 1) for formula i and sample s.
inline GradientEstimate estimate_gradient(const ModelParams& params,
                                          std::span<const TrainingExample* const> batch,
                                          const SolverOptions& solver, std::uint64_t seed,
                                          int samples_per_formula, double baseline = 0.0,
                                          int workers = 1) {
  if (batch.empty()) throw TrainingError("empty batch");
  const auto n = batch.size();
  const auto s_count = static_cast<std::size_t>(samples_per_formula);
  std::vector<ParamGrads> per_formula(n);
  std::vector<std::vector<SampleResult>> results(n);
  std::vector<std::uint64_t> calls(n, 0);
  detail::parallel_for(n, workers, [&](std::size_t i, std::size_t) {
    const auto& ex = *batch[i];
    SatEngine engine(solver);
    ParamGrads acc = params.zeros_like();
    for (std::size_t s = 0; s < s_count; ++s) {
      Matrix h0 = ex.features(params.config.random_feature_dim, derive_seed(seed, i, 2 * s));
      auto fp = forward_pass(params, ex.ops, h0);
      auto mask = sample_mask(PruneScores{fp.mu}, derive_seed(seed, i, 2 * s + 1));
      auto r = evaluate_mask(ex, std::move(mask.keep), engine);
      Vector d = log_prob_logit_grad(fp.mu, r.keep) * (r.loss - baseline);
      auto g = backward_pass(params, ex.ops, fp, d);
      auto dst = acc.tensors();
      auto src = g.tensors();
      for (std::size_t t = 0; t < dst.size(); ++t) *dst[t] += *src[t];
      results[i].push_back(std::move(r));
    }
    per_formula[i] = std::move(acc);
    calls[i] = engine.calls();
  });
  GradientEstimate out;
  out.grads = params.zeros_like();
  auto dst = out.grads.tensors();
  const double scale = 1.0 / static_cast<double>(n * s_count);
  for (std::size_t i = 0; i < n; ++i) {
    auto src = per_formula[i].tensors();
    for (std::size_t t = 0; t < dst.size(); ++t) *dst[t] += *src[t];
    for (auto& r : results[i]) out.samples.push_back(std::move(r));
    out.sat_calls += calls[i];
  }
  for (auto* t : dst) *t *= scale;
  return out;
}

/// Mutable training state: parameters, optimizer and loss baseline.
struct TrainState {
  ModelParams params;
  AdamState adam;
  double baseline = 1.0;
  std::int64_t step = 0;

  explicit TrainState(ModelParams p) : params(std::move(p)), adam(AdamState::for_params(params)) {}
};

inline TrainMetrics reinforce_step(TrainState& state,
                                   std::span<const TrainingExample* const> batch,
                                   SatEngine& engine, const TrainConfig& config,
                                   std::uint64_t seed) {
  const double b = config.use_baseline ? state.baseline : 0.0;
  auto est = estimate_gradient(state.params, batch, engine.options(), seed,
                               config.samples_per_formula, b, config.workers);
  engine.add_calls(est.sat_calls);
  TrainMetrics m;
  m.step = ++state.step;
  m.sat_calls = est.sat_calls;
  std::size_t unsat = 0;
  std::size_t idx = 0;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    for (int s = 0; s < config.samples_per_formula; ++s, ++idx) {
      const auto& r = est.samples[idx];
      m.mean_loss += r.loss;
      if (r.satisfiable) {
        m.sat_failure_rate += 1.0;
      } else {
        ++unsat;
        const double total = static_cast<double>(batch[i]->formula.num_clauses());
        m.pruned_fraction += total > 0 ? 1.0 - static_cast<double>(r.kept) / total : 0.0;
      }
    }
  }
  const double count = static_cast<double>(est.samples.size());
  m.mean_loss /= count;
  m.sat_failure_rate /= count;
  if (unsat > 0) m.pruned_fraction /= static_cast<double>(unsat);
  m.grad_norm = std::sqrt(est.grads.squared_norm());
  m.update_skipped = !adam_update(state.params, state.adam, est.grads, config.learning_rate);
  if (config.use_baseline) {
    state.baseline = config.baseline_decay * state.baseline +
                     (1 - config.baseline_decay) * m.mean_loss;
  }
  return m;
}

// ---------------------------------------------------------------------------
// Evaluation, early stopping, training loop

/// Mean sampled loss over `eval_set`, with seeds fixed by `seed` so successive
/// evaluations are comparable.
inline double evaluate_loss(const ModelParams& params, std::span<const TrainingExample> eval_set,
                            const SolverOptions& solver, int samples, std::uint64_t seed,
                            int workers = 1) {
  if (eval_set.empty()) throw TrainingError("empty eval set");
  std::vector<double> per(eval_set.size(), 0.0);
  detail::parallel_for(eval_set.size(), workers, [&](std::size_t i, std::size_t) {
    SatEngine engine(solver);
    const auto& ex = eval_set[i];
    for (int s = 0; s < samples; ++s) {
      const auto su = static_cast<std::uint64_t>(s);
      Matrix h0 = ex.features(params.config.random_feature_dim, derive_seed(seed, i, 2 * su));
      auto mu = forward(params, ex.ops, h0);
      auto mask = sample_mask(mu, derive_seed(seed, i, 2 * su + 1));
      per[i] += evaluate_mask(ex, std::move(mask.keep), engine).loss;
    }
    per[i] /= samples;
  });
  return std::accumulate(per.begin(), per.end(), 0.0) / static_cast<double>(per.size());
}

/// Stops when `window` consecutive evaluations fail to improve the best loss
/// by more than a relative `min_delta`.
class EarlyStopper {
 public:
  EarlyStopper(int window, double min_delta) : window_(window), min_delta_(min_delta) {}

  /// Returns true when training should stop.
  bool update(double loss) {
    if (loss < best_ * (1.0 - min_delta_)) {
      best_ = loss;
      stale_ = 0;
    } else {
      ++stale_;
    }
    return stale_ >= window_;
  }
  double best() const { return best_; }
  int stale() const { return stale_; }

 private:
  int window_;
  double min_delta_;
  double best_ = std::numeric_limits<double>::infinity();
  int stale_ = 0;
};

struct HistoryRow {
  TrainMetrics metrics;
  std::uint64_t formulas_seen = 0;
  std::optional<double> eval_loss;
};

struct TrainResult {
  ModelParams best;
  double best_eval_loss = std::numeric_limits<double>::infinity();
  std::vector<HistoryRow> history;
  std::uint64_t formulas_seen = 0;
  bool stopped_early = false;
};

inline void write_history_csv(std::ostream& out, const std::vector<HistoryRow>& rows) {
  out << "step,formulas,loss,pruned_fraction,sat_failure_rate,grad_norm,eval_loss\n";
  for (const auto& r : rows) {
    const auto& m = r.metrics;
    out << m.step << ',' << r.formulas_seen << ',' << m.mean_loss << ',' << m.pruned_fraction
        << ',' << m.sat_failure_rate << ',' << m.grad_norm << ',';
    if (r.eval_loss) out << *r.eval_loss;
    out << '\n';
  }
}

/// Cycles through `data` in per-epoch shuffled order until max_formulas
/// formulas have been used or early stopping fires. Returns the parameters
/// with the best eval loss (the initial model counts as an evaluation).
inline TrainResult train(const TrainConfig& config, ModelParams init,
                         std::span<const TrainingExample> data,
                         std::span<const TrainingExample> eval_set, SatEngine& engine,
                         const std::function<void(const HistoryRow&)>& on_step = {}) {
  config.validate();
  if (data.empty()) throw TrainingError("empty training source");
  if (eval_set.empty()) throw TrainingError("empty eval set");
  const std::uint64_t eval_seed = derive_seed(config.seed, 0xe7a1);
  TrainState state(std::move(init));
  TrainResult result;
  EarlyStopper stopper(config.early_stop_window, config.min_delta);

  auto evaluate = [&] {
    return evaluate_loss(state.params, eval_set, engine.options(), config.eval_samples,
                         eval_seed, config.workers);
  };
  result.best = state.params;
  result.best_eval_loss = evaluate();
  stopper.update(result.best_eval_loss);

  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 shuffle_rng(derive_seed(config.seed, 0x5f));
  std::size_t cursor = order.size();
  std::vector<const TrainingExample*> batch;
  while (result.formulas_seen < config.max_formulas) {
    batch.clear();
    while (batch.size() < static_cast<std::size_t>(config.batch_size) &&
           result.formulas_seen + batch.size() < config.max_formulas) {
      if (cursor == order.size()) {
        std::shuffle(order.begin(), order.end(), shuffle_rng);
        cursor = 0;
      }
      batch.push_back(&data[order[cursor++]]);
    }
    HistoryRow row;
    row.metrics = reinforce_step(state, batch, engine, config,
                                 derive_seed(config.seed, static_cast<std::uint64_t>(state.step) + 1));
    result.formulas_seen += batch.size();
    row.formulas_seen = result.formulas_seen;
    bool stop = false;
    if (state.step % config.eval_every == 0 || result.formulas_seen >= config.max_formulas) {
      const double loss = evaluate();
      row.eval_loss = loss;
      if (loss < result.best_eval_loss) {
        result.best_eval_loss = loss;
        result.best = state.params;
      }
      stop = stopper.update(loss);
    }
    result.history.push_back(row);
    if (on_step) on_step(row);
    if (stop) {
      result.stopped_early = true;
      break;
    }
  }
  return result;
}

}  // namespace musprune
