#pragma once

// Benchmark harness: prune, enumerate MUSes in the remaining wall-clock budget,
// lift and audit, then aggregate and write reports.

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "musprune/cnf.hpp"
#include "musprune/corpus.hpp"
#include "musprune/external.hpp"
#include "musprune/model.hpp"
#include "musprune/mus.hpp"
#include "musprune/parallel.hpp"
#include "musprune/pruning.hpp"
#include "musprune/random.hpp"
#include "musprune/sat.hpp"

namespace musprune {

using Seconds = std::chrono::duration<double>;

/// Parses "500ms", "1s", "2.5s", "30min", "2h"; a bare number means seconds.
inline Seconds parse_duration(const std::string& text) {
  double value = 0.0;
  const char* begin = text.data();
  const char* end = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(begin, end, value);
  if (ec != std::errc() || ptr == begin) throw Error("bad duration: " + text);
  const std::string unit(ptr, end);
  double scale = 0.0;
  if (unit.empty() || unit == "s") {
    scale = 1.0;
  } else if (unit == "ms") {
    scale = 1e-3;
  } else if (unit == "min" || unit == "m") {
    scale = 60.0;
  } else if (unit == "h") {
    scale = 3600.0;
  } else {
    throw Error("bad duration unit: " + text);
  }
  if (!(value > 0.0)) throw Error("duration must be positive: " + text);
  return Seconds(value * scale);
}

/// Shortest text that parses back to the same double.
inline std::string format_double(double x) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, ptr);
}

inline std::string format_duration(Seconds d) {
  const double s = d.count();
  if (s >= 3600 && std::fmod(s, 3600) == 0) return format_double(s / 3600) + "h";
  if (s >= 60 && std::fmod(s, 60) == 0) return format_double(s / 60) + "min";
  if (s < 1) return format_double(s * 1000) + "ms";
  return format_double(s) + "s";
}

enum class PrunerKind { None, Model, ClauseLength, VarFreq, Random };

inline std::string to_string(PrunerKind k) {
  switch (k) {
    case PrunerKind::None: return "none";
    case PrunerKind::Model: return "model";
    case PrunerKind::ClauseLength: return "clause_length";
    case PrunerKind::VarFreq: return "var_freq";
    case PrunerKind::Random: return "random";
  }
  return "?";
}

inline PrunerKind parse_pruner_kind(const std::string& s) {
  for (auto k : {PrunerKind::None, PrunerKind::Model, PrunerKind::ClauseLength, PrunerKind::VarFreq,
                 PrunerKind::Random}) {
    if (to_string(k) == s) return k;
  }
  throw Error("unknown pruner: " + s);
}

struct PrunerSpec {
  PrunerKind kind = PrunerKind::None;
  int k = 10;             // threshold grid size (model, var_freq)
  int steps = 100;        // clause_length grid size
  double fraction = 0.1;  // random
  std::shared_ptr<const ModelParams> model;

  std::string label() const { return to_string(kind); }
};

struct EnumeratorSpec {
  /// Empty means the internal MARCO enumerator.
  std::string command;

  bool external() const { return !command.empty(); }
  std::string label() const { return external() ? "external" : "marco"; }
};

struct PipelineOptions {
  /// Lifted MUSes checked with is_mus against the original; 0 disables.
  std::size_t audit_sample = 5;
  Seconds slack{0.05};
  bool keep_muses = true;
  /// Stop after this many MUSes (internal enumerator); 0 = no cap.
  std::size_t mus_limit = 0;
};

struct RunRecord {
  std::string dataset;
  std::string problem;
  std::string enumerator;
  std::string pruner;
  double budget = 0.0;  // seconds
  int repetition = 0;
  std::uint64_t seed = 0;
  /// ok, skipped_sat, pruning_used_budget, pruned_satisfiable, enumerator_error
  std::string status = "ok";
  std::string message;
  std::size_t mus_count = 0;
  bool exhausted = false;
  std::size_t num_clauses = 0;
  double kept_fraction = 1.0;
  std::uint64_t prune_sat_calls = 0;
  bool prune_budget_exhausted = false;
  double prune_time = 0.0;
  double enum_time = 0.0;
  std::uint64_t enum_sat_calls = 0;
  std::size_t audit_checked = 0;
  std::size_t audit_failures = 0;
  bool within_budget = true;
  std::vector<ClauseSet> muses;  // lifted, original indices

  bool counted() const { return status != "skipped_sat"; }
};

namespace detail {

inline PruneOutcome apply_pruner(const CnfFormula& f, const PrunerSpec& p, std::uint64_t seed,
                                 SatEngine& engine) {
  switch (p.kind) {
    case PrunerKind::None: return identity_outcome(f, "none");
    case PrunerKind::Model:
      if (!p.model) throw Error("model pruner needs a checkpoint");
      return model_prune(f, *p.model, p.k, seed, engine);
    case PrunerKind::ClauseLength: return clause_length_prune(f, p.steps, engine);
    case PrunerKind::VarFreq: return variable_frequency_prune(f, p.k, engine);
    case PrunerKind::Random: return random_prune(f, p.fraction, seed, engine);
  }
  throw Error("unknown pruner");
}

/// Evenly spaced sample of n indices out of size.
inline std::vector<std::size_t> audit_indices(std::size_t size, std::size_t n) {
  std::vector<std::size_t> out;
  if (size == 0 || n == 0) return out;
  if (n >= size) {
    for (std::size_t i = 0; i < size; ++i) out.push_back(i);
    return out;
  }
  for (std::size_t j = 0; j < n; ++j) out.push_back(j * size / n);
  return out;
}

/// The pipeline on a problem already known to be UNSAT.
inline RunRecord run_unsat_pipeline(const CnfFormula& problem, const PrunerSpec& pruner,
                                    const EnumeratorSpec& enumerator, Seconds budget,
                                    std::uint64_t seed, const PipelineOptions& opt) {
  using clock = std::chrono::steady_clock;
  RunRecord rec;
  rec.enumerator = enumerator.label();
  rec.pruner = pruner.label();
  rec.budget = budget.count();
  rec.seed = seed;
  rec.num_clauses = problem.num_clauses();

  const auto start = clock::now();
  const auto deadline = start + std::chrono::duration_cast<clock::duration>(budget);
  SolverOptions so;
  so.deadline = deadline;
  SatEngine engine(so);
  PruneOutcome pruned = apply_pruner(problem, pruner, seed, engine);
  const auto after_prune = clock::now();
  rec.prune_time = Seconds(after_prune - start).count();
  rec.kept_fraction = pruned.kept_fraction;
  rec.prune_sat_calls = pruned.sat_calls;
  rec.prune_budget_exhausted = pruned.budget_exhausted;

  const Seconds remaining = deadline - after_prune;
  if (remaining.count() <= 0.0) {
    rec.status = "pruning_used_budget";
    rec.within_budget = rec.prune_time <= budget.count() + opt.slack.count();
    return rec;
  }
  if (pruned.satisfiable == std::optional<bool>(true)) {
    rec.status = "pruned_satisfiable";
    return rec;
  }

  EnumerationTrace trace;
  const auto enum_start = clock::now();
  try {
    if (enumerator.external()) {
      auto ext = enumerate_external(pruned.pruned, enumerator.command, remaining);
      trace = std::move(ext.trace);
      if (ext.malformed_lines > 0) {
        rec.message = std::to_string(ext.malformed_lines) + " malformed output lines";
      }
    } else {
      trace = enumerate_marco(pruned.pruned, remaining, {}, opt.mus_limit);
    }
  } catch (const std::exception& e) {
    rec.status = "enumerator_error";
    rec.message = e.what();
  }
  rec.enum_time = Seconds(clock::now() - enum_start).count();
  rec.enum_sat_calls = trace.sat_calls;
  rec.exhausted = trace.exhausted;
  rec.within_budget = rec.prune_time + rec.enum_time <= budget.count() + opt.slack.count();

  auto lifted = lift_muses(trace, pruned.index_map);
  if (enumerator.external()) {
    // Untrusted output: count only MUSes that check out.
    SubsetOracle oracle(problem);
    std::vector<MusRecord> valid;
    for (auto& m : lifted.muses) {
      if (is_mus(oracle, m.clauses)) valid.push_back(std::move(m));
    }
    rec.audit_checked = lifted.muses.size();
    rec.audit_failures = lifted.muses.size() - valid.size();
    lifted.muses = std::move(valid);
  } else if (opt.audit_sample > 0 && !lifted.muses.empty()) {
    SubsetOracle oracle(problem);
    for (auto i : audit_indices(lifted.muses.size(), opt.audit_sample)) {
      ++rec.audit_checked;
      if (!is_mus(oracle, lifted.muses[i].clauses)) ++rec.audit_failures;
    }
  }
  rec.mus_count = lifted.muses.size();
  if (opt.keep_muses) {
    for (auto& m : lifted.muses) rec.muses.push_back(std::move(m.clauses));
  }
  return rec;
}

}  // namespace detail

/// Clock starts before pruning, so prune time is charged to the budget. The
/// UNSAT precondition check is not.
inline RunRecord run_pipeline(const CnfFormula& problem, const PrunerSpec& pruner,
                              const EnumeratorSpec& enumerator, Seconds budget, std::uint64_t seed,
                              const PipelineOptions& opt = {}) {
  if (!(budget.count() > 0.0)) throw Error("budget must be positive");
  SatEngine check;
  if (check.is_satisfiable(problem)) {
    RunRecord rec;
    rec.enumerator = enumerator.label();
    rec.pruner = pruner.label();
    rec.budget = budget.count();
    rec.seed = seed;
    rec.num_clauses = problem.num_clauses();
    rec.status = "skipped_sat";
    rec.message = "problem is satisfiable";
    return rec;
  }
  return detail::run_unsat_pipeline(problem, pruner, enumerator, budget, seed, opt);
}

struct BenchConfig {
  std::string dataset = "problems";
  std::vector<CorpusEntry> problems;
  std::vector<PrunerSpec> pruners{PrunerSpec{}};
  EnumeratorSpec enumerator;
  std::vector<Seconds> budgets{Seconds(1.0)};
  int repetitions = 1;
  std::uint64_t seed = 0;
  int workers = 1;
  PipelineOptions pipeline;

  void validate() const {
    if (problems.empty()) throw Error("empty problem set");
    if (pruners.empty()) throw Error("no pruner configured");
    if (budgets.empty()) throw Error("no budget configured");
    for (auto b : budgets) {
      if (!(b.count() > 0.0)) throw Error("budgets must be positive");
    }
    if (repetitions < 1) throw Error("repetitions must be >= 1");
  }
};

/// Worker count from MUSPRUNE_WORKERS, else `fallback`.
inline int workers_from_env(int fallback = 1) {
  if (const char* v = std::getenv("MUSPRUNE_WORKERS")) {
    const int n = std::atoi(v);
    if (n >= 1) return n;
  }
  return fallback;
}

struct Aggregate {
  std::string dataset;
  std::string enumerator;
  std::string pruner;
  double budget = 0.0;
  /// Repetition index, or -1 for the row pooled over repetitions (problem
  /// means averaged over repetitions first).
  int repetition = -1;
  std::size_t problems = 0;
  std::size_t skipped = 0;
  double mean = 0.0;
  double std_error = 0.0;

  friend bool operator==(const Aggregate&, const Aggregate&) = default;
};

struct BenchReport {
  std::vector<RunRecord> records;
  std::vector<Aggregate> aggregates;
  std::vector<double> budgets;
  std::vector<std::string> pruners;
};

namespace detail {

inline std::pair<double, double> mean_and_se(const std::vector<double>& xs) {
  if (xs.empty()) return {0.0, 0.0};
  double sum = 0.0;
  for (double x : xs) sum += x;
  const double mean = sum / static_cast<double>(xs.size());
  if (xs.size() < 2) return {mean, 0.0};
  double ss = 0.0;
  for (double x : xs) ss += (x - mean) * (x - mean);
  const double sd = std::sqrt(ss / static_cast<double>(xs.size() - 1));
  return {mean, sd / std::sqrt(static_cast<double>(xs.size()))};
}

}  // namespace detail

/// Per (pruner, budget, repetition) rows, then one pooled row per (pruner,
/// budget). Order follows first appearance in `records`.
inline std::vector<Aggregate> compute_aggregates(const std::vector<RunRecord>& records) {
  struct Key {
    std::string dataset, enumerator, pruner;
    double budget;
    auto operator<=>(const Key&) const = default;
  };
  std::vector<Key> order;
  std::map<Key, std::map<int, std::vector<const RunRecord*>>> groups;
  for (const auto& r : records) {
    Key k{r.dataset, r.enumerator, r.pruner, r.budget};
    if (!groups.count(k)) order.push_back(k);
    groups[k][r.repetition].push_back(&r);
  }
  std::vector<Aggregate> out;
  for (const auto& k : order) {
    const auto& by_rep = groups[k];
    std::map<std::string, std::vector<double>> per_problem;
    std::vector<std::string> problem_order;
    std::size_t pooled_skipped = 0;
    for (const auto& [rep, rows] : by_rep) {
      Aggregate a{k.dataset, k.enumerator, k.pruner, k.budget, rep};
      std::vector<double> counts;
      for (const auto* r : rows) {
        if (!r->counted()) {
          ++a.skipped;
          continue;
        }
        counts.push_back(static_cast<double>(r->mus_count));
        if (!per_problem.count(r->problem)) problem_order.push_back(r->problem);
        per_problem[r->problem].push_back(static_cast<double>(r->mus_count));
      }
      a.problems = counts.size();
      std::tie(a.mean, a.std_error) = detail::mean_and_se(counts);
      pooled_skipped = std::max(pooled_skipped, a.skipped);
      out.push_back(a);
    }
    Aggregate pooled{k.dataset, k.enumerator, k.pruner, k.budget, -1};
    std::vector<double> means;
    for (const auto& p : problem_order) {
      const auto& v = per_problem[p];
      double s = 0.0;
      for (double x : v) s += x;
      means.push_back(s / static_cast<double>(v.size()));
    }
    pooled.problems = means.size();
    pooled.skipped = pooled_skipped;
    std::tie(pooled.mean, pooled.std_error) = detail::mean_and_se(means);
    out.push_back(pooled);
  }
  return out;
}

/// Problems x pruners x budgets x repetitions. The run seed depends only on
/// (seed, problem, repetition), so every pruner and budget sees the same seed.
inline BenchReport run_benchmark(const BenchConfig& config) {
  config.validate();
  const std::size_t np = config.problems.size();
  std::vector<char> unsat(np, 0);
  detail::parallel_for(np, config.workers, [&](std::size_t i, std::size_t) {
    SatEngine e;
    unsat[i] = !e.is_satisfiable(config.problems[i].formula);
  });

  struct Task {
    std::size_t problem, pruner, budget;
    int rep;
  };
  std::vector<Task> tasks;
  for (std::size_t p = 0; p < np; ++p) {
    for (std::size_t q = 0; q < config.pruners.size(); ++q) {
      for (std::size_t b = 0; b < config.budgets.size(); ++b) {
        for (int r = 0; r < config.repetitions; ++r) tasks.push_back({p, q, b, r});
      }
    }
  }
  BenchReport report;
  report.records.resize(tasks.size());
  detail::parallel_for(tasks.size(), config.workers, [&](std::size_t i, std::size_t) {
    const auto& t = tasks[i];
    const auto& problem = config.problems[t.problem];
    const auto& pruner = config.pruners[t.pruner];
    const auto seed = derive_seed(config.seed, t.problem, static_cast<std::uint64_t>(t.rep));
    RunRecord rec;
    if (!unsat[t.problem]) {
      rec.enumerator = config.enumerator.label();
      rec.pruner = pruner.label();
      rec.budget = config.budgets[t.budget].count();
      rec.seed = seed;
      rec.num_clauses = problem.formula.num_clauses();
      rec.status = "skipped_sat";
      rec.message = "problem is satisfiable";
    } else {
      rec = detail::run_unsat_pipeline(problem.formula, pruner, config.enumerator,
                                       config.budgets[t.budget], seed, config.pipeline);
    }
    rec.dataset = config.dataset;
    rec.problem = problem.name;
    rec.repetition = t.rep;
    report.records[i] = std::move(rec);
  });
  // Group by configuration for readable output; stable within a group.
  std::stable_sort(report.records.begin(), report.records.end(),
                   [&](const RunRecord& a, const RunRecord& b) {
                     auto rank = [&](const RunRecord& r) {
                       std::size_t q = 0;
                       while (q < config.pruners.size() && config.pruners[q].label() != r.pruner) ++q;
                       return q;
                     };
                     if (rank(a) != rank(b)) return rank(a) < rank(b);
                     return a.budget < b.budget;
                   });
  report.aggregates = compute_aggregates(report.records);
  for (auto b : config.budgets) report.budgets.push_back(b.count());
  for (const auto& p : config.pruners) report.pruners.push_back(p.label());
  return report;
}

// ---------------------------------------------------------------------------
// Reports

struct ReportOptions {
  /// Leave wall-time fields empty so reruns compare byte for byte.
  bool omit_timings = false;
};

inline const std::vector<std::string>& record_columns() {
  static const std::vector<std::string> cols{
      "dataset",       "problem",         "enumerator",   "pruner",
      "budget_s",      "repetition",      "seed",         "status",
      "mus_count",     "exhausted",       "num_clauses",  "kept_fraction",
      "prune_sat_calls", "prune_budget_exhausted", "prune_time_s", "enum_time_s",
      "enum_sat_calls", "audit_checked",  "audit_failures", "within_budget"};
  return cols;
}

namespace detail {

inline void check_csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") != std::string::npos) {
    throw Error("field not representable in CSV: " + s);
  }
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::size_t begin = 0;
  for (;;) {
    const auto comma = line.find(',', begin);
    out.push_back(line.substr(begin, comma - begin));
    if (comma == std::string::npos) break;
    begin = comma + 1;
  }
  return out;
}

}  // namespace detail

inline void write_records_csv(std::ostream& out, const std::vector<RunRecord>& records,
                              const ReportOptions& opt = {}) {
  const auto& cols = record_columns();
  for (std::size_t i = 0; i < cols.size(); ++i) out << (i ? "," : "") << cols[i];
  out << '\n';
  auto timing = [&](double t) { return opt.omit_timings ? std::string() : format_double(t); };
  for (const auto& r : records) {
    for (const auto* s : {&r.dataset, &r.problem, &r.enumerator, &r.pruner}) {
      detail::check_csv_field(*s);
    }
    out << r.dataset << ',' << r.problem << ',' << r.enumerator << ',' << r.pruner << ','
        << format_double(r.budget) << ',' << r.repetition << ',' << r.seed << ',' << r.status << ','
        << r.mus_count << ',' << int(r.exhausted) << ',' << r.num_clauses << ','
        << format_double(r.kept_fraction) << ',' << r.prune_sat_calls << ','
        << int(r.prune_budget_exhausted) << ',' << timing(r.prune_time) << ','
        << timing(r.enum_time) << ',' << r.enum_sat_calls << ',' << r.audit_checked << ','
        << r.audit_failures << ',' << (opt.omit_timings ? std::string() : std::to_string(int(r.within_budget)))
        << '\n';
  }
}

inline std::vector<RunRecord> read_records_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw Error("empty records CSV");
  const auto header = detail::split_csv_line(line);
  if (header != record_columns()) throw Error("unexpected records CSV header");
  std::vector<RunRecord> out;
  std::size_t line_no = 1;
  auto num = [&](const std::string& s, auto& dst) {
    if (s.empty()) return;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), dst);
    if (ec != std::errc() || p != s.data() + s.size()) {
      throw ParseError(line_no, "bad number '" + s + "'");
    }
  };
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    auto f = detail::split_csv_line(line);
    if (f.size() != header.size()) throw ParseError(line_no, "wrong field count");
    RunRecord r;
    r.dataset = f[0];
    r.problem = f[1];
    r.enumerator = f[2];
    r.pruner = f[3];
    num(f[4], r.budget);
    num(f[5], r.repetition);
    num(f[6], r.seed);
    r.status = f[7];
    num(f[8], r.mus_count);
    int flag = 0;
    num(f[9], flag);
    r.exhausted = flag != 0;
    num(f[10], r.num_clauses);
    num(f[11], r.kept_fraction);
    num(f[12], r.prune_sat_calls);
    flag = 0;
    num(f[13], flag);
    r.prune_budget_exhausted = flag != 0;
    num(f[14], r.prune_time);
    num(f[15], r.enum_time);
    num(f[16], r.enum_sat_calls);
    num(f[17], r.audit_checked);
    num(f[18], r.audit_failures);
    flag = 1;
    num(f[19], flag);
    r.within_budget = flag != 0;
    out.push_back(std::move(r));
  }
  return out;
}

inline void write_aggregates_csv(std::ostream& out, const std::vector<Aggregate>& aggs) {
  out << "dataset,enumerator,pruner,budget_s,repetition,problems,skipped,mean,std_error\n";
  for (const auto& a : aggs) {
    out << a.dataset << ',' << a.enumerator << ',' << a.pruner << ',' << format_double(a.budget)
        << ',' << (a.repetition < 0 ? std::string("all") : std::to_string(a.repetition)) << ','
        << a.problems << ',' << a.skipped << ',' << format_double(a.mean) << ','
        << format_double(a.std_error) << '\n';
  }
}

inline nlohmann::json to_json(const RunRecord& r, const ReportOptions& opt = {}) {
  nlohmann::json j;
  j["dataset"] = r.dataset;
  j["problem"] = r.problem;
  j["enumerator"] = r.enumerator;
  j["pruner"] = r.pruner;
  j["budget_s"] = r.budget;
  j["repetition"] = r.repetition;
  j["seed"] = r.seed;
  j["status"] = r.status;
  if (!r.message.empty()) j["message"] = r.message;
  j["mus_count"] = r.mus_count;
  j["exhausted"] = r.exhausted;
  j["num_clauses"] = r.num_clauses;
  j["prune"] = {{"method", r.pruner},
                {"kept_fraction", r.kept_fraction},
                {"sat_calls", r.prune_sat_calls},
                {"budget_exhausted", r.prune_budget_exhausted}};
  j["enumeration"] = {{"sat_calls", r.enum_sat_calls}};
  j["audit"] = {{"checked", r.audit_checked}, {"failures", r.audit_failures}};
  if (!opt.omit_timings) {
    j["prune"]["time_s"] = r.prune_time;
    j["enumeration"]["time_s"] = r.enum_time;
    j["within_budget"] = r.within_budget;
  }
  j["muses"] = r.muses;
  return j;
}

inline nlohmann::json to_json(const Aggregate& a) {
  return {{"dataset", a.dataset},     {"enumerator", a.enumerator}, {"pruner", a.pruner},
          {"budget_s", a.budget},     {"repetition", a.repetition}, {"problems", a.problems},
          {"skipped", a.skipped},     {"mean", a.mean},             {"std_error", a.std_error}};
}

inline nlohmann::json to_json(const BenchReport& report, const ReportOptions& opt = {}) {
  nlohmann::json j;
  j["records"] = nlohmann::json::array();
  for (const auto& r : report.records) j["records"].push_back(to_json(r, opt));
  j["aggregates"] = nlohmann::json::array();
  for (const auto& a : report.aggregates) j["aggregates"].push_back(to_json(a));
  return j;
}

/// Rows per (dataset, enumerator, pruner), one "mean ± se" column per budget.
/// With a "none" baseline and other pruners the paired table follows: for each
/// budget a without/with column pair.
inline void write_markdown(std::ostream& out, const BenchReport& report) {
  auto cell = [](const Aggregate& a) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.2f ± %.2f", a.mean, a.std_error);
    return std::string(buf);
  };
  auto pooled = [&](const std::string& dataset, const std::string& enumerator,
                    const std::string& pruner, double budget) -> const Aggregate* {
    for (const auto& a : report.aggregates) {
      if (a.repetition < 0 && a.dataset == dataset && a.enumerator == enumerator &&
          a.pruner == pruner && a.budget == budget) {
        return &a;
      }
    }
    return nullptr;
  };
  struct Row {
    std::string dataset, enumerator, pruner;
    bool operator==(const Row&) const = default;
  };
  std::vector<Row> rows;
  for (const auto& a : report.aggregates) {
    Row r{a.dataset, a.enumerator, a.pruner};
    if (std::find(rows.begin(), rows.end(), r) == rows.end()) rows.push_back(r);
  }
  out << "| Dataset | Enumerator | Pruner |";
  for (double b : report.budgets) out << ' ' << format_duration(Seconds(b)) << " |";
  out << "\n|---|---|---|";
  for (std::size_t i = 0; i < report.budgets.size(); ++i) out << "---|";
  out << '\n';
  for (const auto& r : rows) {
    out << "| " << r.dataset << " | " << r.enumerator << " | " << r.pruner << " |";
    for (double b : report.budgets) {
      const auto* a = pooled(r.dataset, r.enumerator, r.pruner, b);
      out << ' ' << (a ? cell(*a) : "-") << " |";
    }
    out << '\n';
  }

  std::vector<Row> paired;
  for (const auto& r : rows) {
    if (r.pruner == "none") continue;
    bool has_base = false;
    for (const auto& s : rows) {
      if (s.pruner == "none" && s.dataset == r.dataset && s.enumerator == r.enumerator) has_base = true;
    }
    if (has_base) paired.push_back(r);
  }
  if (paired.empty()) return;
  out << "\n| Dataset | Enumerator | Pruner |";
  for (double b : report.budgets) {
    const auto d = format_duration(Seconds(b));
    out << ' ' << d << " without | " << d << " with |";
  }
  out << "\n|---|---|---|";
  for (std::size_t i = 0; i < report.budgets.size(); ++i) out << "---|---|";
  out << '\n';
  for (const auto& r : paired) {
    out << "| " << r.dataset << " | " << r.enumerator << " | " << r.pruner << " |";
    for (double b : report.budgets) {
      const auto* base = pooled(r.dataset, r.enumerator, "none", b);
      const auto* with = pooled(r.dataset, r.enumerator, r.pruner, b);
      out << ' ' << (base ? cell(*base) : "-") << " | " << (with ? cell(*with) : "-") << " |";
    }
    out << '\n';
  }
}

/// Per-problem (baseline, pruned) MUS counts averaged over repetitions, one
/// block per non-baseline pruner and budget.
inline void write_scatter_csv(std::ostream& out, const BenchReport& report) {
  out << "dataset,pruner,budget_s,problem,baseline,pruned\n";
  struct Key {
    std::string dataset, pruner;
    double budget;
    std::string problem;
    auto operator<=>(const Key&) const = default;
  };
  std::map<Key, std::pair<double, int>> sums;
  std::vector<Key> order;
  for (const auto& r : report.records) {
    if (!r.counted()) continue;
    Key k{r.dataset, r.pruner, r.budget, r.problem};
    if (!sums.count(k)) order.push_back(k);
    auto& s = sums[k];
    s.first += static_cast<double>(r.mus_count);
    ++s.second;
  }
  for (const auto& k : order) {
    if (k.pruner == "none") continue;
    auto base = sums.find(Key{k.dataset, "none", k.budget, k.problem});
    if (base == sums.end()) continue;
    const auto& w = sums[k];
    out << k.dataset << ',' << k.pruner << ',' << format_double(k.budget) << ',' << k.problem << ','
        << format_double(base->second.first / base->second.second) << ','
        << format_double(w.first / w.second) << '\n';
  }
}

/// Writes records.csv, aggregates.csv, report.json, report.md and scatter.csv
/// into `dir`. Returns the paths written.
inline std::vector<std::filesystem::path> emit_report(const BenchReport& report,
                                                      const std::filesystem::path& dir,
                                                      const ReportOptions& opt = {}) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  std::vector<std::filesystem::path> written;
  auto open = [&](const std::string& name) {
    auto path = dir / name;
    std::ofstream out(path);
    if (!out) throw Error("cannot write " + path.string());
    written.push_back(path);
    return out;
  };
  {
    auto out = open("records.csv");
    write_records_csv(out, report.records, opt);
  }
  {
    auto out = open("aggregates.csv");
    write_aggregates_csv(out, report.aggregates);
  }
  {
    auto out = open("report.json");
    out << to_json(report, opt).dump(1) << '\n';
  }
  {
    auto out = open("report.md");
    write_markdown(out, report);
  }
  {
    auto out = open("scatter.csv");
    write_scatter_csv(out, report);
  }
  return written;
}

}  // namespace musprune
