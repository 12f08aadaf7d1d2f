#pragma once

// CNF formulas: representation, DIMACS I/O and clause-level transforms.

#include <algorithm>
#include <cstddef>
#include <cstdlib>
#include <istream>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace musprune {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ParseError : public Error {
 public:
  ParseError(std::size_t line, const std::string& what)
      : Error("line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

/// DIMACS literal: +v is variable v, -v its negation.
using Literal = int;
using Clause = std::vector<Literal>;
using ClauseIndex = std::size_t;

inline int var_of(Literal lit) { return lit < 0 ? -lit : lit; }

/// An immutable clause list over variables 1..num_vars.
///
/// Clauses keep the literal order they were built with, duplicates included;
/// an empty clause is allowed and makes the formula trivially unsatisfiable.
class CnfFormula {
 public:
  CnfFormula() = default;

  CnfFormula(int num_vars, std::vector<Clause> clauses)
      : num_vars_(num_vars), clauses_(std::move(clauses)) {
    if (num_vars_ < 0) throw Error("negative variable count");
    for (std::size_t i = 0; i < clauses_.size(); ++i) {
      for (Literal lit : clauses_[i]) {
        if (lit == 0 || var_of(lit) > num_vars_) {
          throw Error("clause " + std::to_string(i) + ": literal " +
                      std::to_string(lit) + " out of range 1.." +
                      std::to_string(num_vars_));
        }
      }
    }
  }

  int num_vars() const { return num_vars_; }
  std::size_t num_clauses() const { return clauses_.size(); }
  const std::vector<Clause>& clauses() const { return clauses_; }
  const Clause& clause(ClauseIndex i) const { return clauses_.at(i); }
  bool empty() const { return clauses_.empty(); }

  std::size_t num_literal_occurrences() const {
    std::size_t n = 0;
    for (const auto& c : clauses_) n += c.size();
    return n;
  }

  /// Sub-formula induced by a clause subset, same variable numbering.
  CnfFormula subset(const std::vector<ClauseIndex>& indices) const {
    std::vector<Clause> out;
    out.reserve(indices.size());
    for (ClauseIndex i : indices) out.push_back(clause(i));
    return CnfFormula(num_vars_, std::move(out));
  }

  friend bool operator==(const CnfFormula&, const CnfFormula&) = default;

 private:
  int num_vars_ = 0;
  std::vector<Clause> clauses_;
};

/// true = clause kept.
using KeepMask = std::vector<bool>;

struct PrunedFormula {
  CnfFormula formula;
  /// index_map[j] is the original index of kept clause j.
  std::vector<ClauseIndex> index_map;
  /// Variables occurring in the kept clauses, ascending.
  std::vector<int> used_vars;
};

struct FormulaStats {
  int num_vars = 0;
  std::size_t num_clauses = 0;
  std::map<std::size_t, std::size_t> clause_length_histogram;
  double clause_to_variable_ratio = 0.0;

  friend bool operator==(const FormulaStats&, const FormulaStats&) = default;
};

// ---------------------------------------------------------------------------
// DIMACS

inline CnfFormula parse_dimacs(std::istream& in) {
  std::string line;
  std::size_t line_no = 0;
  bool have_header = false;
  long long declared_vars = 0;
  long long declared_clauses = 0;
  std::vector<Clause> clauses;
  Clause current;
  std::size_t current_start = 0;

  while (std::getline(in, line)) {
    ++line_no;
    std::string_view view(line);
    auto first = view.find_first_not_of(" \t\r");
    if (first == std::string_view::npos) continue;
    view.remove_prefix(first);
    if (view.front() == 'c') continue;
    if (view.front() == '%') break;  // SATLIB trailer
    if (view.front() == 'p') {
      if (have_header) throw ParseError(line_no, "duplicate header");
      std::istringstream hs{std::string(view)};
      std::string p, fmt, extra;
      if (!(hs >> p >> fmt >> declared_vars >> declared_clauses) || p != "p" ||
          fmt != "cnf" || (hs >> extra) || declared_vars < 0 ||
          declared_clauses < 0) {
        throw ParseError(line_no, "malformed header, expected 'p cnf <N> <M>'");
      }
      have_header = true;
      continue;
    }
    if (!have_header) throw ParseError(line_no, "clause before header");

    std::istringstream ls{std::string(view)};
    std::string token;
    while (ls >> token) {
      char* end = nullptr;
      long long value = std::strtoll(token.c_str(), &end, 10);
      if (end == token.c_str() || *end != '\0') {
        throw ParseError(line_no, "invalid token '" + token + "'");
      }
      if (value == 0) {
        clauses.push_back(std::move(current));
        current.clear();
        continue;
      }
      if (std::llabs(value) > declared_vars) {
        throw ParseError(line_no, "literal " + token + " exceeds variable count " +
                                      std::to_string(declared_vars));
      }
      if (current.empty()) current_start = line_no;
      current.push_back(static_cast<Literal>(value));
    }
  }

  if (!have_header) throw ParseError(line_no, "missing 'p cnf' header");
  if (!current.empty()) {
    throw ParseError(current_start, "clause missing terminating 0");
  }
  if (static_cast<long long>(clauses.size()) != declared_clauses) {
    throw ParseError(line_no, "clause count mismatch: header declares " +
                                  std::to_string(declared_clauses) + ", found " +
                                  std::to_string(clauses.size()));
  }
  return CnfFormula(static_cast<int>(declared_vars), std::move(clauses));
}

inline CnfFormula parse_dimacs(std::string_view text) {
  std::istringstream in{std::string(text)};
  return parse_dimacs(in);
}

inline std::string write_dimacs(const CnfFormula& formula) {
  std::string out = "p cnf " + std::to_string(formula.num_vars()) + " " +
                    std::to_string(formula.num_clauses()) + "\n";
  for (const auto& clause : formula.clauses()) {
    for (Literal lit : clause) {
      out += std::to_string(lit);
      out += ' ';
    }
    out += "0\n";
  }
  return out;
}

// ---------------------------------------------------------------------------
// Transforms

inline PrunedFormula prune_clauses(const CnfFormula& formula, const KeepMask& mask) {
  if (mask.size() != formula.num_clauses()) {
    throw Error("keep mask has length " + std::to_string(mask.size()) +
                " but formula has " + std::to_string(formula.num_clauses()) +
                " clauses");
  }
  PrunedFormula out;
  std::vector<Clause> kept;
  std::vector<bool> used(static_cast<std::size_t>(formula.num_vars()) + 1, false);
  for (std::size_t i = 0; i < mask.size(); ++i) {
    if (!mask[i]) continue;
    kept.push_back(formula.clause(i));
    out.index_map.push_back(i);
    for (Literal lit : formula.clause(i)) used[var_of(lit)] = true;
  }
  for (int v = 1; v <= formula.num_vars(); ++v) {
    if (used[v]) out.used_vars.push_back(v);
  }
  out.formula = CnfFormula(formula.num_vars(), std::move(kept));
  return out;
}

/// Keeps clauses whose indices appear in `indices` (ascending order enforced).
inline PrunedFormula prune_to_indices(const CnfFormula& formula,
                                      std::vector<ClauseIndex> indices) {
  KeepMask mask(formula.num_clauses(), false);
  for (ClauseIndex i : indices) mask.at(i) = true;
  return prune_clauses(formula, mask);
}

/// Drops every clause containing a pure literal, repeated to a fixpoint.
inline CnfFormula pure_literal_elimination(const CnfFormula& formula) {
  const auto n = static_cast<std::size_t>(formula.num_vars());
  // occurrences[0..n] positive, [n+1..2n+1] negative
  std::vector<std::size_t> pos(n + 1, 0), neg(n + 1, 0);
  std::vector<bool> alive(formula.num_clauses(), true);
  for (const auto& c : formula.clauses()) {
    for (Literal lit : c) (lit > 0 ? pos : neg)[var_of(lit)]++;
  }
  auto is_pure = [&](Literal lit) {
    auto v = static_cast<std::size_t>(var_of(lit));
    return lit > 0 ? neg[v] == 0 : pos[v] == 0;
  };
  bool changed = true;
  while (changed) {
    changed = false;
    for (std::size_t i = 0; i < formula.num_clauses(); ++i) {
      if (!alive[i]) continue;
      const auto& c = formula.clause(i);
      if (std::none_of(c.begin(), c.end(), is_pure)) continue;
      alive[i] = false;
      changed = true;
      for (Literal lit : c) (lit > 0 ? pos : neg)[var_of(lit)]--;
    }
  }
  std::vector<Clause> kept;
  for (std::size_t i = 0; i < formula.num_clauses(); ++i) {
    if (alive[i]) kept.push_back(formula.clause(i));
  }
  return CnfFormula(formula.num_vars(), std::move(kept));
}

inline FormulaStats clause_stats(const CnfFormula& formula) {
  FormulaStats s;
  s.num_vars = formula.num_vars();
  s.num_clauses = formula.num_clauses();
  for (const auto& c : formula.clauses()) s.clause_length_histogram[c.size()]++;
  s.clause_to_variable_ratio =
      s.num_vars > 0 ? static_cast<double>(s.num_clauses) / s.num_vars : 0.0;
  return s;
}

/// Corpus-level statistics: histograms add, ratio = total clauses / total vars.
inline FormulaStats merge_stats(const std::vector<FormulaStats>& parts) {
  FormulaStats s;
  for (const auto& p : parts) {
    s.num_vars += p.num_vars;
    s.num_clauses += p.num_clauses;
    for (auto [len, count] : p.clause_length_histogram) {
      s.clause_length_histogram[len] += count;
    }
  }
  s.clause_to_variable_ratio =
      s.num_vars > 0 ? static_cast<double>(s.num_clauses) / s.num_vars : 0.0;
  return s;
}

/// Sorted, duplicate-free copy of a clause; used by the solver front ends.
inline Clause normalized(const Clause& clause) {
  Clause c = clause;
  std::sort(c.begin(), c.end());
  c.erase(std::unique(c.begin(), c.end()), c.end());
  return c;
}

}  // namespace musprune
