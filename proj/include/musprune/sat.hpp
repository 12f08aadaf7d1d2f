#pragma once

// Compact CDCL solver: two watched literals, first-UIP learning, VSIDS with
// phase saving, Luby restarts, solving under assumptions.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include "musprune/cnf.hpp"

namespace musprune {

enum class SatStatus { Sat, Unsat, Unknown };

struct SolverStats {
  std::uint64_t decisions = 0;
  std::uint64_t propagations = 0;
  std::uint64_t conflicts = 0;
  std::uint64_t restarts = 0;
};

struct SolverOptions {
  /// Conflicts allowed per solve call; 0 = unlimited.
  std::uint64_t conflict_limit = 0;
  std::optional<std::chrono::steady_clock::time_point> deadline;
  /// Polarity tried first for a fresh variable.
  bool default_phase = false;
  bool phase_saving = true;
  std::uint64_t restart_base = 100;
};

struct SatResult {
  SatStatus status = SatStatus::Unknown;
  /// model[v - 1] for variable v; present iff status == Sat.
  std::optional<std::vector<bool>> model;
  SolverStats stats;

  bool sat() const { return status == SatStatus::Sat; }
  bool unsat() const { return status == SatStatus::Unsat; }
  bool value(Literal lit) const {
    bool v = (*model)[static_cast<std::size_t>(var_of(lit)) - 1];
    return lit > 0 ? v : !v;
  }
};

class ResourceLimitError : public Error {
 public:
  ResourceLimitError() : Error("SAT solver resource limit exceeded") {}
};

class Solver {
 public:
  explicit Solver(SolverOptions options = {}) : options_(options) {}

  const SolverOptions& options() const { return options_; }
  void set_deadline(std::optional<std::chrono::steady_clock::time_point> d) {
    options_.deadline = d;
  }

  int num_vars() const { return static_cast<int>(assigns_.size()); }

  int new_var() {
    int v = num_vars();
    assigns_.push_back(0);
    level_.push_back(0);
    reason_.push_back(kNoReason);
    activity_.push_back(0.0);
    phase_.push_back(options_.default_phase);
    seen_.push_back(0);
    heap_index_.push_back(-1);
    watches_.emplace_back();
    watches_.emplace_back();
    heap_insert(v);
    return v + 1;
  }

  void ensure_vars(int n) {
    while (num_vars() < n) new_var();
  }

  /// Adds a DIMACS clause. Returns false once the clause set is known UNSAT.
  bool add_clause(std::span<const Literal> clause) {
    originals_.emplace_back(clause.begin(), clause.end());
    if (!ok_) return false;
    cancel_until(0);
    std::vector<Lit> lits;
    lits.reserve(clause.size());
    for (Literal l : clause) {
      ensure_vars(var_of(l));
      lits.push_back(to_lit(l));
    }
    std::sort(lits.begin(), lits.end());
    std::vector<Lit> out;
    for (std::size_t i = 0; i < lits.size(); ++i) {
      Lit p = lits[i];
      if (i > 0 && p == lits[i - 1]) continue;
      if (i > 0 && p == neg(lits[i - 1])) return true;  // tautology
      if (value(p) == kTrue) return true;
      if (value(p) == kFalse) continue;
      out.push_back(p);
    }
    if (out.empty()) return ok_ = false;
    if (out.size() == 1) {
      enqueue(out[0], kNoReason);
      if (propagate() != kNoReason) ok_ = false;
      return ok_;
    }
    attach(allocate(std::move(out), false));
    return true;
  }

  bool add_clause(std::initializer_list<Literal> clause) {
    return add_clause(std::span<const Literal>(clause.begin(), clause.size()));
  }

  void add_formula(const CnfFormula& formula) {
    ensure_vars(formula.num_vars());
    for (const auto& c : formula.clauses()) add_clause(c);
  }

  SatResult solve(std::span<const Literal> assumptions = {}) {
    SatResult result;
    SolverStats before = stats_;
    assumptions_.clear();
    for (Literal a : assumptions) {
      ensure_vars(var_of(a));
      assumptions_.push_back(to_lit(a));
    }
    result.status = ok_ ? search_loop() : SatStatus::Unsat;
    if (result.status == SatStatus::Sat) {
      std::vector<bool> model(assigns_.size());
      for (std::size_t v = 0; v < assigns_.size(); ++v) model[v] = assigns_[v] == kTrue;
      verify_model(model, assumptions);
      result.model = std::move(model);
    }
    cancel_until(0);
    result.stats.decisions = stats_.decisions - before.decisions;
    result.stats.propagations = stats_.propagations - before.propagations;
    result.stats.conflicts = stats_.conflicts - before.conflicts;
    result.stats.restarts = stats_.restarts - before.restarts;
    return result;
  }

  SatResult solve(std::initializer_list<Literal> assumptions) {
    return solve(std::span<const Literal>(assumptions.begin(), assumptions.size()));
  }

  const SolverStats& stats() const { return stats_; }

 private:
  using Lit = std::uint32_t;  // 2 * var + sign
  using CRef = std::int32_t;
  static constexpr CRef kNoReason = -1;
  static constexpr std::int8_t kTrue = 1, kFalse = -1, kUndef = 0;

  struct ClauseData {
    std::vector<Lit> lits;
    double activity = 0.0;
    bool learnt = false;
    bool deleted = false;
  };
  struct Watcher {
    CRef cref;
    Lit blocker;
  };

  static Lit to_lit(Literal l) {
    return static_cast<Lit>(2 * (var_of(l) - 1) + (l < 0 ? 1 : 0));
  }
  static Lit neg(Lit p) { return p ^ 1u; }
  static int var(Lit p) { return static_cast<int>(p >> 1); }
  static bool sign(Lit p) { return (p & 1u) != 0; }

  std::int8_t value(Lit p) const {
    std::int8_t a = assigns_[var(p)];
    return sign(p) ? static_cast<std::int8_t>(-a) : a;
  }
  int decision_level() const { return static_cast<int>(trail_lim_.size()); }

  CRef allocate(std::vector<Lit> lits, bool learnt) {
    ClauseData c;
    c.lits = std::move(lits);
    c.learnt = learnt;
    clauses_.push_back(std::move(c));
    CRef cr = static_cast<CRef>(clauses_.size() - 1);
    if (learnt) learnts_.push_back(cr);
    return cr;
  }

  void attach(CRef cr) {
    const auto& c = clauses_[cr].lits;
    watches_[c[0]].push_back({cr, c[1]});
    watches_[c[1]].push_back({cr, c[0]});
  }

  void enqueue(Lit p, CRef from) {
    int v = var(p);
    assigns_[v] = sign(p) ? kFalse : kTrue;
    level_[v] = decision_level();
    reason_[v] = from;
    trail_.push_back(p);
  }

  // watches_[p] holds clauses watching literal p; visited when p becomes false.
  CRef propagate() {
    CRef conflict = kNoReason;
    while (qhead_ < trail_.size()) {
      Lit p = trail_[qhead_++];
      Lit false_lit = neg(p);
      auto& ws = watches_[false_lit];
      ++stats_.propagations;
      std::size_t i = 0, j = 0;
      while (i < ws.size()) {
        Watcher w = ws[i++];
        if (value(w.blocker) == kTrue) {
          ws[j++] = w;
          continue;
        }
        ClauseData& c = clauses_[w.cref];
        if (c.deleted) continue;
        auto& lits = c.lits;
        if (lits[0] == false_lit) std::swap(lits[0], lits[1]);
        Lit first = lits[0];
        if (first != w.blocker && value(first) == kTrue) {
          ws[j++] = {w.cref, first};
          continue;
        }
        bool moved = false;
        for (std::size_t k = 2; k < lits.size(); ++k) {
          if (value(lits[k]) != kFalse) {
            std::swap(lits[1], lits[k]);
            watches_[lits[1]].push_back({w.cref, first});
            moved = true;
            break;
          }
        }
        if (moved) continue;
        ws[j++] = {w.cref, first};
        if (value(first) == kFalse) {
          conflict = w.cref;
          qhead_ = trail_.size();
          while (i < ws.size()) ws[j++] = ws[i++];
        } else {
          enqueue(first, w.cref);
        }
      }
      ws.resize(j);
      if (conflict != kNoReason) break;
    }
    return conflict;
  }

  void analyze(CRef conflict, std::vector<Lit>& learnt, int& backtrack_level) {
    int path = 0;
    Lit p = 0;
    bool have_p = false;
    learnt.clear();
    learnt.push_back(0);
    std::size_t index = trail_.size();
    do {
      ClauseData& c = clauses_[conflict];
      if (c.learnt) bump_clause(c);
      for (std::size_t k = have_p ? 1 : 0; k < c.lits.size(); ++k) {
        Lit q = c.lits[k];
        int v = var(q);
        if (seen_[v] || level_[v] == 0) continue;
        bump_var(v);
        seen_[v] = 1;
        if (level_[v] >= decision_level()) {
          ++path;
        } else {
          learnt.push_back(q);
        }
      }
      while (!seen_[var(trail_[--index])]) {
      }
      p = trail_[index];
      have_p = true;
      conflict = reason_[var(p)];
      seen_[var(p)] = 0;
      --path;
    } while (path > 0);
    learnt[0] = neg(p);

    // Local minimization: drop literals implied by other learnt literals.
    analyze_clear_.assign(learnt.begin() + 1, learnt.end());
    std::size_t keep = 1;
    for (std::size_t k = 1; k < learnt.size(); ++k) {
      CRef r = reason_[var(learnt[k])];
      bool redundant = r != kNoReason;
      if (redundant) {
        for (Lit q : clauses_[r].lits) {
          int v = var(q);
          if (v != var(learnt[k]) && !seen_[v] && level_[v] > 0) {
            redundant = false;
            break;
          }
        }
      }
      if (!redundant) learnt[keep++] = learnt[k];
    }
    for (Lit q : analyze_clear_) seen_[var(q)] = 0;
    learnt.resize(keep);

    backtrack_level = 0;
    if (learnt.size() > 1) {
      std::size_t max_i = 1;
      for (std::size_t k = 2; k < learnt.size(); ++k) {
        if (level_[var(learnt[k])] > level_[var(learnt[max_i])]) max_i = k;
      }
      std::swap(learnt[1], learnt[max_i]);
      backtrack_level = level_[var(learnt[1])];
    }
  }

  void cancel_until(int lvl) {
    if (decision_level() <= lvl) return;
    for (std::size_t c = trail_.size(); c-- > trail_lim_[lvl];) {
      int v = var(trail_[c]);
      assigns_[v] = kUndef;
      reason_[v] = kNoReason;
      if (options_.phase_saving) phase_[v] = !sign(trail_[c]);
      if (heap_index_[v] < 0) heap_insert(v);
    }
    trail_.resize(trail_lim_[lvl]);
    qhead_ = trail_.size();
    trail_lim_.resize(lvl);
  }

  // VSIDS --------------------------------------------------------------
  bool heap_less(int a, int b) const {
    return activity_[a] > activity_[b] || (activity_[a] == activity_[b] && a < b);
  }
  void heap_up(std::size_t i) {
    int v = heap_[i];
    while (i > 0) {
      std::size_t parent = (i - 1) / 2;
      if (!heap_less(v, heap_[parent])) break;
      heap_[i] = heap_[parent];
      heap_index_[heap_[i]] = static_cast<int>(i);
      i = parent;
    }
    heap_[i] = v;
    heap_index_[v] = static_cast<int>(i);
  }
  void heap_down(std::size_t i) {
    int v = heap_[i];
    for (;;) {
      std::size_t child = 2 * i + 1;
      if (child >= heap_.size()) break;
      if (child + 1 < heap_.size() && heap_less(heap_[child + 1], heap_[child])) ++child;
      if (!heap_less(heap_[child], v)) break;
      heap_[i] = heap_[child];
      heap_index_[heap_[i]] = static_cast<int>(i);
      i = child;
    }
    heap_[i] = v;
    heap_index_[v] = static_cast<int>(i);
  }
  void heap_insert(int v) {
    heap_.push_back(v);
    heap_up(heap_.size() - 1);
  }
  int heap_pop() {
    int top = heap_[0];
    heap_index_[top] = -1;
    int last = heap_.back();
    heap_.pop_back();
    if (!heap_.empty()) {
      heap_[0] = last;
      heap_index_[last] = 0;
      heap_down(0);
    }
    return top;
  }
  void bump_var(int v) {
    if ((activity_[v] += var_inc_) > 1e100) {
      for (double& a : activity_) a *= 1e-100;
      var_inc_ *= 1e-100;
    }
    if (heap_index_[v] >= 0) heap_up(static_cast<std::size_t>(heap_index_[v]));
  }
  void bump_clause(ClauseData& c) {
    if ((c.activity += cla_inc_) > 1e20) {
      for (CRef r : learnts_) clauses_[r].activity *= 1e-20;
      cla_inc_ *= 1e-20;
    }
  }

  std::optional<Lit> pick_branch() {
    while (!heap_.empty()) {
      int v = heap_pop();
      if (assigns_[v] == kUndef) {
        return static_cast<Lit>(2 * v + (phase_[v] ? 0 : 1));
      }
    }
    return std::nullopt;
  }

  bool locked(CRef cr) const {
    Lit first = clauses_[cr].lits[0];
    return reason_[var(first)] == cr && value(first) == kTrue;
  }

  void reduce_db() {
    std::vector<CRef> sorted = learnts_;
    std::sort(sorted.begin(), sorted.end(), [&](CRef a, CRef b) {
      return clauses_[a].activity < clauses_[b].activity ||
             (clauses_[a].activity == clauses_[b].activity && a < b);
    });
    std::vector<CRef> keep;
    std::size_t removable = sorted.size() / 2;
    for (std::size_t i = 0; i < sorted.size(); ++i) {
      CRef cr = sorted[i];
      auto& c = clauses_[cr];
      if (i < removable && c.lits.size() > 2 && !locked(cr)) {
        c.deleted = true;
        c.lits.clear();
        c.lits.shrink_to_fit();
      } else {
        keep.push_back(cr);
      }
    }
    std::sort(keep.begin(), keep.end());
    learnts_ = std::move(keep);
  }

  static double luby(double y, std::uint64_t x) {
    std::uint64_t size = 1;
    int seq = 0;
    while (size < x + 1) {
      ++seq;
      size = 2 * size + 1;
    }
    while (size - 1 != x) {
      size = (size - 1) >> 1;
      --seq;
      x = x % size;
    }
    return std::pow(y, seq);
  }

  bool out_of_budget(std::uint64_t conflicts_at_start) const {
    if (options_.conflict_limit != 0 &&
        stats_.conflicts - conflicts_at_start >= options_.conflict_limit) {
      return true;
    }
    return options_.deadline && std::chrono::steady_clock::now() >= *options_.deadline;
  }

  SatStatus search_loop() {
    std::uint64_t conflicts_at_start = stats_.conflicts;
    if (max_learnts_ == 0) {
      max_learnts_ = std::max<double>(2000.0, static_cast<double>(originals_.size()) / 3.0);
    }
    for (std::uint64_t restart = 0;; ++restart) {
      auto limit = static_cast<std::uint64_t>(luby(2.0, restart) *
                                              static_cast<double>(options_.restart_base));
      SatStatus s = search(limit, conflicts_at_start);
      if (s != SatStatus::Unknown || out_of_budget(conflicts_at_start)) return s;
      ++stats_.restarts;
    }
  }

  // Returns Unknown on restart or budget exhaustion.
  SatStatus search(std::uint64_t conflict_limit, std::uint64_t conflicts_at_start) {
    std::uint64_t conflicts = 0;
    std::vector<Lit> learnt;
    std::uint32_t ticks = 0;
    for (;;) {
      CRef conflict = propagate();
      if (conflict != kNoReason) {
        ++stats_.conflicts;
        ++conflicts;
        if (decision_level() == 0) {
          ok_ = false;
          return SatStatus::Unsat;
        }
        int bt = 0;
        analyze(conflict, learnt, bt);
        cancel_until(bt);
        if (learnt.size() == 1) {
          enqueue(learnt[0], kNoReason);
        } else {
          CRef cr = allocate(learnt, true);
          attach(cr);
          bump_clause(clauses_[cr]);
          enqueue(learnt[0], cr);
        }
        var_inc_ /= 0.95;
        cla_inc_ /= 0.999;
        if (out_of_budget(conflicts_at_start)) {
          cancel_until(0);
          return SatStatus::Unknown;
        }
        continue;
      }
      if (conflicts >= conflict_limit) {
        cancel_until(0);
        return SatStatus::Unknown;
      }
      if ((++ticks & 1023u) == 0 && out_of_budget(conflicts_at_start)) {
        cancel_until(0);
        return SatStatus::Unknown;
      }
      if (static_cast<double>(learnts_.size()) - static_cast<double>(trail_.size()) >=
          max_learnts_) {
        reduce_db();
        max_learnts_ *= 1.1;
      }

      std::optional<Lit> next;
      while (decision_level() < static_cast<int>(assumptions_.size())) {
        Lit a = assumptions_[decision_level()];
        if (value(a) == kTrue) {
          trail_lim_.push_back(trail_.size());
        } else if (value(a) == kFalse) {
          return SatStatus::Unsat;
        } else {
          next = a;
          break;
        }
      }
      if (!next) {
        next = pick_branch();
        if (!next) return SatStatus::Sat;
        ++stats_.decisions;
      }
      trail_lim_.push_back(trail_.size());
      enqueue(*next, kNoReason);
    }
  }

  void verify_model(const std::vector<bool>& model, std::span<const Literal> assumptions) const {
    auto holds = [&](Literal l) {
      bool v = model[static_cast<std::size_t>(var_of(l)) - 1];
      return l > 0 ? v : !v;
    };
    for (const auto& c : originals_) {
      if (std::none_of(c.begin(), c.end(), holds)) {
        throw std::logic_error("solver produced a model violating an input clause");
      }
    }
    for (Literal a : assumptions) {
      if (!holds(a)) throw std::logic_error("solver model violates an assumption");
    }
  }

  SolverOptions options_;
  bool ok_ = true;
  std::vector<Clause> originals_;
  std::vector<ClauseData> clauses_;
  std::vector<CRef> learnts_;
  std::vector<std::vector<Watcher>> watches_;
  std::vector<std::int8_t> assigns_;
  std::vector<int> level_;
  std::vector<CRef> reason_;
  std::vector<double> activity_;
  std::vector<bool> phase_;
  std::vector<char> seen_;
  std::vector<int> heap_;
  std::vector<int> heap_index_;
  std::vector<Lit> trail_;
  std::vector<std::size_t> trail_lim_;
  std::vector<Lit> assumptions_;
  std::vector<Lit> analyze_clear_;
  std::size_t qhead_ = 0;
  double var_inc_ = 1.0;
  double cla_inc_ = 1.0;
  double max_learnts_ = 0.0;
  SolverStats stats_;
};

/// Stateless front end used by the pruning, training and generation code.
/// Every query builds a fresh solver, so results depend only on the input.
class SatEngine {
 public:
  explicit SatEngine(SolverOptions options = {}) : options_(options) {}

  SatResult solve(const CnfFormula& formula, std::span<const Literal> assumptions = {}) {
    for (std::size_t i = 0; i < assumptions.size(); ++i) {
      for (std::size_t j = i + 1; j < assumptions.size(); ++j) {
        if (assumptions[i] == -assumptions[j]) {
          throw Error("inconsistent assumptions on variable " +
                      std::to_string(var_of(assumptions[i])));
        }
      }
    }
    ++calls_;
    Solver solver(options_);
    solver.add_formula(formula);
    auto result = solver.solve(assumptions);
    if (result.sat()) result.model->resize(static_cast<std::size_t>(formula.num_vars()));
    return result;
  }

  /// Throws ResourceLimitError when the budget runs out.
  bool is_satisfiable(const CnfFormula& formula) {
    auto r = solve(formula);
    if (r.status == SatStatus::Unknown) throw ResourceLimitError();
    return r.sat();
  }

  /// Incremental solver with this engine's options; callers report their
  /// queries through add_calls so the counter stays meaningful.
  Solver make_solver() const { return Solver(options_); }
  void add_calls(std::uint64_t n) { calls_ += n; }

  std::uint64_t calls() const { return calls_; }
  void reset_calls() { calls_ = 0; }
  const SolverOptions& options() const { return options_; }

 private:
  SolverOptions options_;
  std::uint64_t calls_ = 0;
};

}  // namespace musprune
