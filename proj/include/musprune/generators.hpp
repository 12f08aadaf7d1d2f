#pragma once

// Unsatisfiable formula generators: SR-style random clauses, clause-statistics
// matched formulas and graph-coloring encodings.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <numeric>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "musprune/cnf.hpp"
#include "musprune/sat.hpp"

namespace musprune {

struct GeneratedFormula {
  CnfFormula formula;
  std::uint64_t sat_calls = 0;
  /// Graph-coloring metadata (zero for other generators).
  int graph_nodes = 0;
  std::size_t graph_edges = 0;
  int colors = 0;
  int attempts = 1;
};

class GenerationError : public Error {
 public:
  using Error::Error;
};

namespace detail {

inline Clause random_clause(std::mt19937_64& rng, int num_vars, int length) {
  length = std::min(length, num_vars);
  std::vector<int> vars(static_cast<std::size_t>(num_vars));
  std::iota(vars.begin(), vars.end(), 1);
  std::bernoulli_distribution sign(0.5);
  Clause c;
  for (int k = 0; k < length; ++k) {
    std::uniform_int_distribution<int> pick(k, num_vars - 1);
    std::swap(vars[static_cast<std::size_t>(k)], vars[static_cast<std::size_t>(pick(rng))]);
    int v = vars[static_cast<std::size_t>(k)];
    c.push_back(sign(rng) ? v : -v);
  }
  return c;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// SR-style random formulas

struct SrSpec {
  int num_vars = 40;
  double bernoulli_p = 0.7;
  double geometric_p = 0.3;
};

/// Clause length 2 + Bernoulli(bernoulli_p) + Geometric(geometric_p), the
/// geometric counting failures before the first success (support 0, 1, ...).
inline GeneratedFormula gen_sr_random(const SrSpec& spec, std::uint64_t seed,
                                      SatEngine& engine) {
  if (spec.num_vars < 2) throw Error("SR generation needs at least 2 variables");
  if (!(spec.bernoulli_p > 0 && spec.bernoulli_p < 1 && spec.geometric_p > 0 &&
        spec.geometric_p < 1)) {
    throw Error("SR probabilities must lie in (0,1)");
  }
  std::mt19937_64 rng(seed);
  std::bernoulli_distribution extra(spec.bernoulli_p);
  std::geometric_distribution<int> geo(spec.geometric_p);
  Solver solver = engine.make_solver();
  solver.ensure_vars(spec.num_vars);
  std::vector<Clause> clauses;
  GeneratedFormula out;
  for (;;) {
    int len = 2 + (extra(rng) ? 1 : 0) + geo(rng);
    Clause c = detail::random_clause(rng, spec.num_vars, len);
    solver.add_clause(c);
    clauses.push_back(std::move(c));
    auto r = solver.solve();
    ++out.sat_calls;
    if (r.status == SatStatus::Unknown) throw ResourceLimitError();
    if (r.unsat()) break;
  }
  engine.add_calls(out.sat_calls);
  out.formula = CnfFormula(spec.num_vars, std::move(clauses));
  return out;
}

// ---------------------------------------------------------------------------
// Statistics-matched formulas

struct StatMatchedSpec {
  FormulaStats target;
  int min_vars = 20;
  int max_vars = 40;
  double lower_bound_factor = 0.9;
  /// Consecutive rejected clauses tolerated before giving up.
  int max_rejections = 10000;
};

/// Below the clause lower bound a sampled clause is kept only if the formula
/// stays satisfiable; afterwards clauses are added until it becomes UNSAT.
inline GeneratedFormula gen_stat_matched(const StatMatchedSpec& spec, std::uint64_t seed,
                                         SatEngine& engine) {
  const auto& hist = spec.target.clause_length_histogram;
  if (!(spec.target.clause_to_variable_ratio > 0)) throw Error("target ratio must be positive");
  if (hist.empty()) throw Error("target length distribution is empty");
  if (spec.min_vars < 1 || spec.max_vars < spec.min_vars) throw Error("bad variable range");
  std::vector<std::size_t> lengths;
  std::vector<double> weights;
  for (auto [len, count] : hist) {
    if (len == 0) continue;
    lengths.push_back(len);
    weights.push_back(static_cast<double>(count));
  }
  if (lengths.empty()) throw Error("target length distribution has only empty clauses");

  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> pick_n(spec.min_vars, spec.max_vars);
  std::discrete_distribution<std::size_t> pick_len(weights.begin(), weights.end());
  const int n = pick_n(rng);
  const auto lower_bound = static_cast<std::size_t>(
      std::ceil(spec.lower_bound_factor * spec.target.clause_to_variable_ratio * n));

  Solver solver = engine.make_solver();
  solver.ensure_vars(n);
  int next_activation = n + 1;
  std::vector<Clause> clauses;
  GeneratedFormula out;
  int rejections = 0;
  while (clauses.size() < lower_bound) {
    Clause c = detail::random_clause(rng, n, static_cast<int>(lengths[pick_len(rng)]));
    Clause guarded = c;
    const int act = next_activation++;
    guarded.push_back(-act);
    solver.add_clause(guarded);
    auto r = solver.solve({act});
    ++out.sat_calls;
    if (r.status == SatStatus::Unknown) throw ResourceLimitError();
    if (r.sat()) {
      solver.add_clause({act});
      clauses.push_back(std::move(c));
      rejections = 0;
    } else {
      solver.add_clause({-act});
      if (++rejections > spec.max_rejections) {
        engine.add_calls(out.sat_calls);
        throw GenerationError("statistics-matched generation stalled after " +
                              std::to_string(clauses.size()) + " clauses");
      }
    }
  }
  for (;;) {
    Clause c = detail::random_clause(rng, n, static_cast<int>(lengths[pick_len(rng)]));
    solver.add_clause(c);
    clauses.push_back(std::move(c));
    auto r = solver.solve();
    ++out.sat_calls;
    if (r.status == SatStatus::Unknown) throw ResourceLimitError();
    if (r.unsat()) break;
  }
  engine.add_calls(out.sat_calls);
  out.formula = CnfFormula(n, std::move(clauses));
  return out;
}

// ---------------------------------------------------------------------------
// Graph coloring

/// Variable x(v, c) = v * K + c + 1. Clauses: per node at-least-one color and
/// pairwise at-most-one, then per edge one conflict clause per color.
inline CnfFormula coloring_encoding(int nodes, int colors,
                                    const std::vector<std::pair<int, int>>& edges) {
  auto x = [&](int v, int c) { return v * colors + c + 1; };
  std::vector<Clause> clauses;
  for (int v = 0; v < nodes; ++v) {
    Clause alo;
    for (int c = 0; c < colors; ++c) alo.push_back(x(v, c));
    clauses.push_back(std::move(alo));
    for (int c = 0; c < colors; ++c) {
      for (int d = c + 1; d < colors; ++d) clauses.push_back({-x(v, c), -x(v, d)});
    }
  }
  for (auto [u, v] : edges) {
    for (int c = 0; c < colors; ++c) clauses.push_back({-x(u, c), -x(v, c)});
  }
  return CnfFormula(nodes * colors, std::move(clauses));
}

struct ColoringSpec {
  int min_nodes = 10;
  int max_nodes = 30;
  double edge_p = 0.8;
  int min_colors = 4;
  int max_colors = 7;
  int max_attempts = 1000;
};

/// Erdos-Renyi graph and color count, resampled until the encoding is UNSAT.
inline GeneratedFormula gen_graph_coloring(const ColoringSpec& spec, std::uint64_t seed,
                                           SatEngine& engine) {
  if (spec.min_nodes < 1 || spec.max_nodes < spec.min_nodes) throw Error("bad node range");
  if (spec.min_colors < 2 || spec.max_colors < spec.min_colors) throw Error("bad color range");
  if (!(spec.edge_p > 0 && spec.edge_p < 1)) throw Error("edge probability must lie in (0,1)");
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> pick_n(spec.min_nodes, spec.max_nodes);
  std::uniform_int_distribution<int> pick_k(spec.min_colors, spec.max_colors);
  std::bernoulli_distribution edge(spec.edge_p);
  GeneratedFormula out;
  for (int attempt = 1; attempt <= spec.max_attempts; ++attempt) {
    const int n = pick_n(rng);
    const int k = pick_k(rng);
    std::vector<std::pair<int, int>> edges;
    for (int u = 0; u < n; ++u) {
      for (int v = u + 1; v < n; ++v) {
        if (edge(rng)) edges.emplace_back(u, v);
      }
    }
    CnfFormula f = coloring_encoding(n, k, edges);
    ++out.sat_calls;
    auto r = engine.solve(f);
    if (r.status == SatStatus::Unknown) throw ResourceLimitError();
    if (r.unsat()) {
      out.formula = std::move(f);
      out.graph_nodes = n;
      out.graph_edges = edges.size();
      out.colors = k;
      out.attempts = attempt;
      return out;
    }
  }
  throw GenerationError("graph coloring: no UNSAT instance in " +
                        std::to_string(spec.max_attempts) + " attempts");
}

// ---------------------------------------------------------------------------
// Dispatch

enum class GenVariant { SrRandom, StatMatched, GraphColoring };

inline const char* to_string(GenVariant v) {
  switch (v) {
    case GenVariant::SrRandom: return "sr_random";
    case GenVariant::StatMatched: return "stat_matched";
    case GenVariant::GraphColoring: return "graph_coloring";
  }
  return "?";
}

inline GenVariant parse_gen_variant(const std::string& s) {
  if (s == "sr_random" || s == "sr") return GenVariant::SrRandom;
  if (s == "stat_matched") return GenVariant::StatMatched;
  if (s == "graph_coloring" || s == "coloring") return GenVariant::GraphColoring;
  throw Error("unknown generator variant '" + s + "'");
}

struct GenSpec {
  GenVariant variant = GenVariant::SrRandom;
  /// SR: variable count drawn uniformly from [min_vars, max_vars].
  int min_vars = 20;
  int max_vars = 40;
  double bernoulli_p = 0.7;
  double geometric_p = 0.3;
  StatMatchedSpec stat_matched;
  ColoringSpec coloring;
};

inline GeneratedFormula generate(const GenSpec& spec, std::uint64_t seed, SatEngine& engine) {
  switch (spec.variant) {
    case GenVariant::SrRandom: {
      if (spec.min_vars < 2 || spec.max_vars < spec.min_vars) throw Error("bad variable range");
      std::mt19937_64 rng(seed);
      std::uniform_int_distribution<int> pick(spec.min_vars, spec.max_vars);
      SrSpec sr{pick(rng), spec.bernoulli_p, spec.geometric_p};
      return gen_sr_random(sr, rng(), engine);
    }
    case GenVariant::StatMatched:
      return gen_stat_matched(spec.stat_matched, seed, engine);
    case GenVariant::GraphColoring:
      return gen_graph_coloring(spec.coloring, seed, engine);
  }
  throw Error("unknown generator variant");
}

}  // namespace musprune
