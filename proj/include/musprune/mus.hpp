#pragma once

// Minimal unsatisfiable subsets: checks, deletion-based shrinking, a
// MARCO-style online enumerator and an exhaustive oracle for tiny inputs.

#include <algorithm>
#include <chrono>
#include <cstdint>
#include <functional>
#include <optional>
#include <set>
#include <vector>

#include "musprune/cnf.hpp"
#include "musprune/sat.hpp"

namespace musprune {

/// Ascending, duplicate-free clause indices.
using ClauseSet = std::vector<ClauseIndex>;

struct MusRecord {
  ClauseSet clauses;
  /// Time since enumeration start when the record was emitted.
  std::chrono::duration<double> found_at{0.0};

  std::size_t size() const { return clauses.size(); }
  friend bool operator==(const MusRecord& a, const MusRecord& b) {
    return a.clauses == b.clauses;
  }
};

struct EnumerationTrace {
  std::vector<MusRecord> muses;
  std::uint64_t seeds_tested = 0;
  std::uint64_t sat_calls = 0;
  /// True iff the map became empty, i.e. every MUS was found.
  bool exhausted = false;
};

using MusSink = std::function<void(const MusRecord&)>;

inline ClauseSet all_clauses(const CnfFormula& formula) {
  ClauseSet s(formula.num_clauses());
  for (std::size_t i = 0; i < s.size(); ++i) s[i] = i;
  return s;
}

inline ClauseSet canonical(ClauseSet s) {
  std::sort(s.begin(), s.end());
  s.erase(std::unique(s.begin(), s.end()), s.end());
  return s;
}

/// Incremental satisfiability checks of clause subsets of one formula.
///
/// Clause i is loaded as (c_i | -s_i) with a fresh selector s_i; a subset is
/// checked by assuming its selectors. Learnt clauses carry over between calls.
class SubsetOracle {
 public:
  explicit SubsetOracle(const CnfFormula& formula, SolverOptions options = {})
      : formula_(&formula), solver_(options) {
    solver_.ensure_vars(formula.num_vars());
    for (std::size_t i = 0; i < formula.num_clauses(); ++i) {
      Clause c = formula.clause(i);
      int selector = formula.num_vars() + static_cast<int>(i) + 1;
      c.push_back(-selector);
      solver_.add_clause(c);
    }
  }

  const CnfFormula& formula() const { return *formula_; }

  void set_deadline(std::optional<std::chrono::steady_clock::time_point> d) {
    solver_.set_deadline(d);
  }

  SatResult check(const ClauseSet& subset) {
    std::vector<Literal> assumptions;
    assumptions.reserve(subset.size());
    for (ClauseIndex i : subset) {
      if (i >= formula_->num_clauses()) {
        throw Error("clause index " + std::to_string(i) + " out of range");
      }
      assumptions.push_back(formula_->num_vars() + static_cast<int>(i) + 1);
    }
    ++calls_;
    return solver_.solve(assumptions);
  }

  /// Throws ResourceLimitError on Unknown.
  bool is_sat(const ClauseSet& subset) {
    auto r = check(subset);
    if (r.status == SatStatus::Unknown) throw ResourceLimitError();
    return r.sat();
  }

  /// Clauses of the formula satisfied by `result`'s model.
  ClauseSet satisfied_by(const SatResult& result) const {
    ClauseSet out;
    for (std::size_t i = 0; i < formula_->num_clauses(); ++i) {
      const auto& c = formula_->clause(i);
      if (std::any_of(c.begin(), c.end(), [&](Literal l) { return result.value(l); })) {
        out.push_back(i);
      }
    }
    return out;
  }

  std::uint64_t calls() const { return calls_; }

 private:
  const CnfFormula* formula_;
  Solver solver_;
  std::uint64_t calls_ = 0;
};

inline bool is_mus(SubsetOracle& oracle, const ClauseSet& subset) {
  ClauseSet s = canonical(subset);
  if (oracle.is_sat(s)) return false;
  for (std::size_t k = 0; k < s.size(); ++k) {
    ClauseSet rest = s;
    rest.erase(rest.begin() + static_cast<std::ptrdiff_t>(k));
    if (!oracle.is_sat(rest)) return false;
  }
  return true;
}

inline bool is_mus(const CnfFormula& formula, const ClauseSet& subset) {
  SubsetOracle oracle(formula);
  return is_mus(oracle, subset);
}

namespace detail {

// Deletion-based shrink in ascending index order; nullopt if interrupted.
inline std::optional<ClauseSet> shrink_with(SubsetOracle& oracle, ClauseSet current) {
  for (std::size_t k = 0; k < current.size();) {
    ClauseSet trial = current;
    trial.erase(trial.begin() + static_cast<std::ptrdiff_t>(k));
    auto r = oracle.check(trial);
    if (r.status == SatStatus::Unknown) return std::nullopt;
    if (r.unsat()) {
      current = std::move(trial);
    } else {
      ++k;
    }
  }
  return current;
}

// Grows a satisfiable seed to a maximal satisfiable subset.
inline std::optional<ClauseSet> grow_with(SubsetOracle& oracle, const ClauseSet& seed,
                                          const SatResult& seed_result) {
  const std::size_t m = oracle.formula().num_clauses();
  std::vector<bool> in(m, false);
  for (ClauseIndex i : seed) in[i] = true;
  for (ClauseIndex i : oracle.satisfied_by(seed_result)) in[i] = true;
  for (std::size_t j = 0; j < m; ++j) {
    if (in[j]) continue;
    ClauseSet trial;
    for (std::size_t i = 0; i < m; ++i) {
      if (in[i] || i == j) trial.push_back(i);
    }
    auto r = oracle.check(trial);
    if (r.status == SatStatus::Unknown) return std::nullopt;
    if (r.sat()) {
      for (ClauseIndex i : oracle.satisfied_by(r)) in[i] = true;
    }
  }
  ClauseSet out;
  for (std::size_t i = 0; i < m; ++i) {
    if (in[i]) out.push_back(i);
  }
  return out;
}

}  // namespace detail

inline MusRecord shrink(SubsetOracle& oracle, const ClauseSet& seed) {
  ClauseSet s = canonical(seed);
  if (oracle.is_sat(s)) throw Error("shrink: seed subset is satisfiable");
  auto out = detail::shrink_with(oracle, std::move(s));
  if (!out) throw ResourceLimitError();
  return MusRecord{std::move(*out), {}};
}

inline MusRecord shrink(const CnfFormula& formula, const ClauseSet& seed) {
  SubsetOracle oracle(formula);
  return shrink(oracle, seed);
}

/// Clauses c of `subset` such that subset \ {c} is satisfiable.
inline ClauseSet critical_clauses(const CnfFormula& formula, const ClauseSet& subset) {
  SubsetOracle oracle(formula);
  ClauseSet s = canonical(subset);
  if (oracle.is_sat(s)) throw Error("critical_clauses: subset is satisfiable");
  ClauseSet out;
  for (std::size_t k = 0; k < s.size(); ++k) {
    ClauseSet rest = s;
    rest.erase(rest.begin() + static_cast<std::ptrdiff_t>(k));
    if (oracle.is_sat(rest)) out.push_back(s[k]);
  }
  return out;
}

/// Online MUS enumeration over a map of explored clause subsets.
///
/// The map solver has one variable per clause and prefers true, so seeds
/// start large. UNSAT seeds are shrunk and their supersets blocked; SAT seeds
/// are grown to an MSS and its subsets blocked. Stops at the deadline or when
/// the map is exhausted, or after max_muses MUSes when that is nonzero. A MUS
/// interrupted mid-shrink is not reported.
inline EnumerationTrace enumerate_marco(const CnfFormula& formula,
                                        std::chrono::duration<double> budget,
                                        const MusSink& sink = {}, std::size_t max_muses = 0) {
  if (budget.count() <= 0.0) throw Error("enumeration budget must be positive");
  using clock = std::chrono::steady_clock;
  const auto start = clock::now();
  const auto deadline =
      start + std::chrono::duration_cast<clock::duration>(budget);

  EnumerationTrace trace;
  SolverOptions opts;
  opts.deadline = deadline;
  SubsetOracle oracle(formula, opts);

  const ClauseSet everything = all_clauses(formula);
  auto whole = oracle.check(everything);
  trace.sat_calls = oracle.calls();
  if (whole.sat()) throw Error("enumerate_marco: formula is satisfiable");
  if (whole.status == SatStatus::Unknown) return trace;

  SolverOptions map_opts;
  map_opts.deadline = deadline;
  map_opts.default_phase = true;
  map_opts.phase_saving = false;
  Solver map(map_opts);
  map.ensure_vars(static_cast<int>(formula.num_clauses()));

  while (clock::now() < deadline) {
    auto m = map.solve();
    if (m.unsat()) {
      trace.exhausted = true;
      break;
    }
    if (m.status == SatStatus::Unknown) break;
    ClauseSet seed;
    for (std::size_t i = 0; i < formula.num_clauses(); ++i) {
      if ((*m.model)[i]) seed.push_back(i);
    }
    ++trace.seeds_tested;
    auto r = oracle.check(seed);
    if (r.status == SatStatus::Unknown) break;
    if (r.unsat()) {
      auto mus = detail::shrink_with(oracle, std::move(seed));
      if (!mus) break;
      std::vector<Literal> block;
      for (ClauseIndex i : *mus) block.push_back(-static_cast<Literal>(i + 1));
      MusRecord rec{std::move(*mus), clock::now() - start};
      if (sink) sink(rec);
      trace.muses.push_back(std::move(rec));
      map.add_clause(block);
      if (max_muses != 0 && trace.muses.size() >= max_muses) break;
    } else {
      auto mss = detail::grow_with(oracle, seed, r);
      if (!mss) break;
      std::vector<bool> in(formula.num_clauses(), false);
      for (ClauseIndex i : *mss) in[i] = true;
      std::vector<Literal> block;
      for (std::size_t i = 0; i < in.size(); ++i) {
        if (!in[i]) block.push_back(static_cast<Literal>(i + 1));
      }
      map.add_clause(block);
    }
  }
  trace.sat_calls = oracle.calls();
  return trace;
}

/// Every MUS of a formula with at most 20 clauses, by exhaustive subset scan.
inline std::vector<MusRecord> brute_force_muses(const CnfFormula& formula,
                                                SatEngine& engine) {
  const std::size_t m = formula.num_clauses();
  if (m > 20) throw Error("brute_force_muses: more than 20 clauses");
  const std::uint32_t count = 1u << m;
  // unsat[mask]; a superset of an UNSAT subset is UNSAT without a solver call.
  std::vector<char> unsat(count, 0);
  auto members = [&](std::uint32_t mask) {
    ClauseSet s;
    for (std::size_t i = 0; i < m; ++i) {
      if (mask & (1u << i)) s.push_back(i);
    }
    return s;
  };
  for (std::uint32_t mask = 0; mask < count; ++mask) {
    bool known = false;
    for (std::size_t i = 0; i < m && !known; ++i) {
      if ((mask & (1u << i)) && unsat[mask & ~(1u << i)]) known = true;
    }
    unsat[mask] = known || !engine.is_satisfiable(formula.subset(members(mask)));
  }
  std::vector<MusRecord> out;
  for (std::uint32_t mask = 0; mask < count; ++mask) {
    if (!unsat[mask]) continue;
    bool minimal = true;
    for (std::size_t i = 0; i < m && minimal; ++i) {
      if ((mask & (1u << i)) && unsat[mask & ~(1u << i)]) minimal = false;
    }
    if (minimal) out.push_back(MusRecord{members(mask), {}});
  }
  std::sort(out.begin(), out.end(),
            [](const MusRecord& a, const MusRecord& b) { return a.clauses < b.clauses; });
  return out;
}

inline std::vector<MusRecord> brute_force_muses(const CnfFormula& formula) {
  SatEngine engine;
  return brute_force_muses(formula, engine);
}

/// Maps MUS indices of a pruned formula back to the original formula.
inline EnumerationTrace lift_muses(const EnumerationTrace& pruned_trace,
                                   const std::vector<ClauseIndex>& index_map) {
  EnumerationTrace out = pruned_trace;
  for (auto& rec : out.muses) {
    for (auto& i : rec.clauses) {
      if (i >= index_map.size()) {
        throw Error("lift_muses: clause index " + std::to_string(i) + " is not mapped");
      }
      i = index_map[i];
    }
    rec.clauses = canonical(std::move(rec.clauses));
  }
  return out;
}

}  // namespace musprune
