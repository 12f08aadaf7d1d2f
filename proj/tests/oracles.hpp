#pragma once

// Test-only reference implementations, independent of the library's solver.

#include <cstdint>
#include <random>
#include <vector>

#include "musprune/cnf.hpp"

namespace musprune::oracle {

/// Truth-table satisfiability for formulas with at most 20 variables.
inline bool truth_table_sat(const CnfFormula& f) {
  const int n = f.num_vars();
  for (std::uint32_t a = 0; a < (1u << n); ++a) {
    bool all = true;
    for (const auto& c : f.clauses()) {
      bool sat = false;
      for (Literal l : c) {
        bool v = (a >> (var_of(l) - 1)) & 1u;
        if ((l > 0) == v) {
          sat = true;
          break;
        }
      }
      if (!sat) {
        all = false;
        break;
      }
    }
    if (all) return true;
  }
  return false;
}

/// MUS sets by truth table over every clause subset (m <= 12 or so).
inline std::vector<std::vector<ClauseIndex>> truth_table_muses(const CnfFormula& f) {
  const std::size_t m = f.num_clauses();
  std::vector<char> sat(1u << m);
  auto members = [&](std::uint32_t mask) {
    std::vector<ClauseIndex> s;
    for (std::size_t i = 0; i < m; ++i) {
      if (mask & (1u << i)) s.push_back(i);
    }
    return s;
  };
  for (std::uint32_t mask = 0; mask < (1u << m); ++mask) {
    sat[mask] = truth_table_sat(f.subset(members(mask)));
  }
  std::vector<std::vector<ClauseIndex>> out;
  for (std::uint32_t mask = 0; mask < (1u << m); ++mask) {
    if (sat[mask]) continue;
    bool minimal = true;
    for (std::size_t i = 0; i < m; ++i) {
      if ((mask & (1u << i)) && !sat[mask & ~(1u << i)]) minimal = false;
    }
    if (minimal) out.push_back(members(mask));
  }
  return out;
}

/// Uniform random k-CNF-ish formula with clause lengths in [1, max_len].
inline CnfFormula random_formula(std::mt19937_64& rng, int num_vars, std::size_t num_clauses,
                                 int max_len = 3) {
  std::uniform_int_distribution<int> len(1, max_len);
  std::uniform_int_distribution<int> var(1, num_vars);
  std::bernoulli_distribution sign(0.5);
  std::vector<Clause> clauses;
  for (std::size_t i = 0; i < num_clauses; ++i) {
    Clause c;
    int l = len(rng);
    for (int k = 0; k < l; ++k) c.push_back(sign(rng) ? var(rng) : -var(rng));
    clauses.push_back(c);
  }
  return CnfFormula(num_vars, std::move(clauses));
}

/// Random UNSAT formula with at most `max_clauses` clauses (rejection sampling).
inline CnfFormula random_small_unsat(std::mt19937_64& rng, std::size_t max_clauses) {
  for (;;) {
    std::uniform_int_distribution<int> vars(2, 4);
    std::uniform_int_distribution<std::size_t> count(2, max_clauses);
    auto f = random_formula(rng, vars(rng), count(rng), 3);
    if (!truth_table_sat(f)) return f;
  }
}

/// F1 = (x1)(-x1)(x1 | x2)(-x2): MUSes {0,1} and {1,2,3}.
inline CnfFormula f1() { return CnfFormula(2, {{1}, {-1}, {1, 2}, {-2}}); }

}  // namespace musprune::oracle
