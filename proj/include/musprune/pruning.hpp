#pragma once

// Test-time pruning. Every method except random_prune returns either the
// input itself or a clause subset that a SAT call has shown unsatisfiable.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "musprune/cnf.hpp"
#include "musprune/graph.hpp"
#include "musprune/model.hpp"
#include "musprune/sat.hpp"

namespace musprune {

struct PruneOutcome {
  CnfFormula pruned;
  std::vector<ClauseIndex> index_map;  // kept index -> original index
  double kept_fraction = 1.0;
  std::uint64_t sat_calls = 0;
  std::chrono::duration<double> wall_time{0};
  std::string method;
  /// Satisfiability of `pruned` when some call established it.
  std::optional<bool> satisfiable;
  /// Chosen threshold (score methods) or clause length (clause_length).
  std::optional<double> threshold;
  /// A SAT call hit its budget; the search treated it as "not proven UNSAT".
  bool budget_exhausted = false;
};

namespace detail {

inline PruneOutcome identity_outcome(const CnfFormula& f, std::string method) {
  PruneOutcome out;
  out.pruned = f;
  out.index_map.resize(f.num_clauses());
  std::iota(out.index_map.begin(), out.index_map.end(), ClauseIndex{0});
  out.method = std::move(method);
  return out;
}

/// Binary search over levels 0..L-1 whose kept sets grow monotonically, level
/// L-1 keeping everything. Finds the smallest level whose kept set is UNSAT,
/// assuming the full formula is; at most ceil(log2(L)) SAT calls.
template <typename KeepAt>
PruneOutcome level_search(const CnfFormula& formula, std::size_t levels, KeepAt keep_at,
                          SatEngine& engine, std::string method) {
  using clock = std::chrono::steady_clock;
  const auto start = clock::now();
  PruneOutcome out = identity_outcome(formula, std::move(method));
  const std::size_t m = formula.num_clauses();
  if (m == 0 || levels == 0) {
    out.wall_time = clock::now() - start;
    return out;
  }
  const auto calls_before = engine.calls();
  std::ptrdiff_t lo = -1;  // largest level known not to give a proven-UNSAT strict subset
  auto hi = static_cast<std::ptrdiff_t>(levels) - 1;
  std::optional<PrunedFormula> best;
  while (hi - lo > 1) {
    const std::ptrdiff_t mid = lo + (hi - lo) / 2;
    KeepMask keep = keep_at(static_cast<std::size_t>(mid));
    const auto kept = static_cast<std::size_t>(std::count(keep.begin(), keep.end(), true));
    if (kept == m) {
      hi = mid;  // same as the input
      continue;
    }
    if (kept == 0) {
      lo = mid;  // empty formula is satisfiable
      continue;
    }
    auto candidate = prune_clauses(formula, keep);
    auto r = engine.solve(candidate.formula);
    if (r.status == SatStatus::Unknown) out.budget_exhausted = true;
    if (r.unsat()) {
      hi = mid;
      best = std::move(candidate);
    } else {
      lo = mid;
    }
  }
  out.sat_calls = engine.calls() - calls_before;
  out.threshold = static_cast<double>(hi);  // callers translate the level
  if (best) {
    out.pruned = std::move(best->formula);
    out.index_map = std::move(best->index_map);
    out.kept_fraction = static_cast<double>(out.index_map.size()) / static_cast<double>(m);
    out.satisfiable = false;
  }
  out.wall_time = clock::now() - start;
  return out;
}

}  // namespace detail

/// Thresholds t_j = t_min + j * (t_max - t_min) / k for j = 0..k with
/// t_max = max(scores), t_min = t_max / k; t_k is exactly t_max.
inline std::vector<double> threshold_grid(const std::vector<double>& scores, int k) {
  if (k < 1) throw Error("k must be >= 1");
  if (scores.empty()) return {};
  const double t_max = *std::max_element(scores.begin(), scores.end());
  const double t_min = t_max / k;
  std::vector<double> grid(static_cast<std::size_t>(k) + 1);
  for (int j = 0; j < k; ++j) grid[static_cast<std::size_t>(j)] = t_min + j * (t_max - t_min) / k;
  grid.back() = t_max;
  return grid;
}

/// Keeps clause i iff score_i <= t, for the smallest grid threshold t whose
/// kept set is UNSAT.
inline PruneOutcome threshold_prune(const CnfFormula& formula, const PruneScores& scores, int k,
                                    SatEngine& engine, std::string method = "threshold") {
  if (scores.size() != formula.num_clauses()) throw Error("score count does not match clauses");
  const auto grid = threshold_grid(scores.mu, k);
  auto keep_at = [&](std::size_t level) {
    KeepMask keep(scores.size());
    for (std::size_t i = 0; i < keep.size(); ++i) keep[i] = scores.mu[i] <= grid[level];
    return keep;
  };
  auto out = detail::level_search(formula, grid.size(), keep_at, engine, std::move(method));
  if (!grid.empty()) out.threshold = grid[static_cast<std::size_t>(*out.threshold)];
  return out;
}

/// Integer grid l_min + round(j * (l_max - l_min) / K), j = 0..K, deduplicated.
inline std::vector<std::size_t> clause_length_grid(const CnfFormula& formula, int steps) {
  if (steps < 1) throw Error("K must be >= 1");
  if (formula.num_clauses() == 0) return {};
  std::size_t lo = SIZE_MAX, hi = 0;
  for (const auto& c : formula.clauses()) {
    lo = std::min(lo, c.size());
    hi = std::max(hi, c.size());
  }
  std::vector<std::size_t> grid;
  for (int j = 0; j <= steps; ++j) {
    const auto l = lo + static_cast<std::size_t>(std::llround(
                            static_cast<double>(j) * static_cast<double>(hi - lo) / steps));
    if (grid.empty() || grid.back() != l) grid.push_back(l);
  }
  return grid;
}

/// Keeps clauses of length <= l* for the smallest grid length l* giving UNSAT.
inline PruneOutcome clause_length_prune(const CnfFormula& formula, int steps, SatEngine& engine) {
  const auto grid = clause_length_grid(formula, steps);
  auto keep_at = [&](std::size_t level) {
    KeepMask keep(formula.num_clauses());
    for (std::size_t i = 0; i < keep.size(); ++i) keep[i] = formula.clause(i).size() <= grid[level];
    return keep;
  };
  auto out = detail::level_search(formula, grid.size(), keep_at, engine, "clause_length");
  if (!grid.empty()) out.threshold = static_cast<double>(grid[static_cast<std::size_t>(*out.threshold)]);
  return out;
}

/// Clause score = -(mean over literals of the variable's occurrence count).
/// Empty clauses get the lowest score so they are pruned last.
inline std::vector<double> variable_frequency_scores(const CnfFormula& formula) {
  std::vector<double> freq(static_cast<std::size_t>(formula.num_vars()) + 1, 0.0);
  for (const auto& c : formula.clauses()) {
    for (Literal l : c) freq[static_cast<std::size_t>(var_of(l))] += 1.0;
  }
  std::vector<double> scores(formula.num_clauses(), 0.0);
  double lowest = 0.0;
  bool any = false;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    const auto& c = formula.clause(i);
    if (c.empty()) continue;
    double s = 0.0;
    for (Literal l : c) s += freq[static_cast<std::size_t>(var_of(l))];
    scores[i] = -s / static_cast<double>(c.size());
    lowest = any ? std::min(lowest, scores[i]) : scores[i];
    any = true;
  }
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (formula.clause(i).empty()) scores[i] = lowest;
  }
  return scores;
}

/// Affine map of scores onto [margin, 1 - margin]; constant scores map to 0.5.
inline std::vector<double> rescale_scores(const std::vector<double>& s, double margin = 0.05) {
  if (s.empty()) return {};
  const auto [lo, hi] = std::minmax_element(s.begin(), s.end());
  std::vector<double> out(s.size(), 0.5);
  if (*hi > *lo) {
    for (std::size_t i = 0; i < s.size(); ++i) {
      out[i] = margin + (1 - 2 * margin) * (s[i] - *lo) / (*hi - *lo);
    }
  }
  return out;
}

inline PruneOutcome variable_frequency_prune(const CnfFormula& formula, int k, SatEngine& engine) {
  PruneScores scores{rescale_scores(variable_frequency_scores(formula))};
  return threshold_prune(formula, scores, k, engine, "var_freq");
}

/// Removes exactly floor(fraction * M) clauses chosen uniformly. The result may
/// be satisfiable; one SAT call records which.
inline PruneOutcome random_prune(const CnfFormula& formula, double fraction, std::uint64_t seed,
                                 SatEngine& engine) {
  if (!(fraction >= 0.0 && fraction <= 1.0)) throw Error("fraction must lie in [0,1]");
  using clock = std::chrono::steady_clock;
  const auto start = clock::now();
  const std::size_t m = formula.num_clauses();
  const auto remove = static_cast<std::size_t>(std::floor(fraction * static_cast<double>(m)));
  std::vector<std::size_t> order(m);
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);
  KeepMask keep(m, true);
  for (std::size_t i = 0; i < remove; ++i) keep[order[i]] = false;
  auto p = prune_clauses(formula, keep);
  PruneOutcome out;
  out.method = "random";
  const auto calls_before = engine.calls();
  auto r = engine.solve(p.formula);
  out.sat_calls = engine.calls() - calls_before;
  if (r.status != SatStatus::Unknown) out.satisfiable = r.sat();
  out.budget_exhausted = r.status == SatStatus::Unknown;
  out.pruned = std::move(p.formula);
  out.index_map = std::move(p.index_map);
  out.kept_fraction = m == 0 ? 1.0 : static_cast<double>(m - remove) / static_cast<double>(m);
  out.threshold = fraction;
  out.wall_time = clock::now() - start;
  return out;
}

/// Model forward pass plus the threshold search; wall time covers both.
inline PruneOutcome model_prune(const CnfFormula& formula, const ModelParams& params, int k,
                                std::uint64_t feature_seed, SatEngine& engine) {
  using clock = std::chrono::steady_clock;
  const auto start = clock::now();
  auto graph = build_lcg(formula);
  auto features = make_input_features(graph, params.config.random_feature_dim, feature_seed);
  auto scores = forward(params, make_operators(graph), features);
  auto out = threshold_prune(formula, scores, k, engine, "model");
  out.wall_time = clock::now() - start;
  return out;
}

}  // namespace musprune
