#pragma once

// Command-line front end. run_cli is the whole program minus main(), so tests
// can drive it with captured streams.

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "musprune/bench.hpp"
#include "musprune/corpus.hpp"
#include "musprune/generators.hpp"
#include "musprune/model.hpp"
#include "musprune/mus.hpp"
#include "musprune/pruning.hpp"
#include "musprune/random.hpp"
#include "musprune/training.hpp"

namespace musprune {

namespace cli {

/// Contract violation reported to the user; maps to exit code 2.
class UsageError : public Error {
 public:
  using Error::Error;
};

struct GenOptions {
  std::string variant = "sr_random";
  int min_vars = 20;
  int max_vars = 40;
  double bernoulli_p = 0.7;
  double geometric_p = 0.3;
  std::string target;  // corpus whose statistics stat_matched copies
  int min_nodes = 10;
  int max_nodes = 30;
  double edge_p = 0.8;
  int min_colors = 4;
  int max_colors = 7;

  void add_to(CLI::App& app) {
    app.add_option("--variant", variant, "sr_random | stat_matched | graph_coloring")
        ->capture_default_str();
    app.add_option("--min-vars", min_vars)->capture_default_str();
    app.add_option("--max-vars", max_vars)->capture_default_str();
    app.add_option("--bernoulli-p", bernoulli_p, "P(one extra literal), SR")->capture_default_str();
    app.add_option("--geometric-p", geometric_p, "geometric success probability, SR")
        ->capture_default_str();
    app.add_option("--target", target, "corpus whose clause statistics stat_matched reproduces");
    app.add_option("--min-nodes", min_nodes)->capture_default_str();
    app.add_option("--max-nodes", max_nodes)->capture_default_str();
    app.add_option("--edge-p", edge_p)->capture_default_str();
    app.add_option("--min-colors", min_colors)->capture_default_str();
    app.add_option("--max-colors", max_colors)->capture_default_str();
  }

  GenSpec spec() const {
    GenSpec s;
    s.variant = parse_gen_variant(variant);
    s.min_vars = min_vars;
    s.max_vars = max_vars;
    s.bernoulli_p = bernoulli_p;
    s.geometric_p = geometric_p;
    if (s.variant == GenVariant::StatMatched) {
      if (target.empty()) throw UsageError("stat_matched needs --target");
      std::vector<FormulaStats> parts;
      for (const auto& e : read_corpus(target)) parts.push_back(clause_stats(e.formula));
      s.stat_matched.target = merge_stats(parts);
      s.stat_matched.min_vars = min_vars;
      s.stat_matched.max_vars = max_vars;
    }
    s.coloring.min_nodes = min_nodes;
    s.coloring.max_nodes = max_nodes;
    s.coloring.edge_p = edge_p;
    s.coloring.min_colors = min_colors;
    s.coloring.max_colors = max_colors;
    return s;
  }
};

inline std::vector<CorpusEntry> generated_problems(const GenSpec& spec, std::uint64_t seed,
                                                   std::size_t count) {
  SatEngine engine;
  std::vector<CorpusEntry> out;
  for (std::size_t i = 0; i < count; ++i) {
    out.push_back({corpus_file_name(i), generate(spec, derive_seed(seed, i), engine).formula});
  }
  return out;
}

inline std::vector<TrainingExample> to_examples(std::vector<CorpusEntry> entries) {
  SatEngine engine;
  std::vector<TrainingExample> out;
  out.reserve(entries.size());
  for (auto& e : entries) out.push_back(make_training_example(std::move(e.formula), engine, e.name));
  return out;
}

inline void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path);
  out << text;
}

}  // namespace cli

/// Returns the process exit code: 0 success, 1 usage error from the parser,
/// 2 contract violation or runtime failure.
inline int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"MUS enumeration with learned clause pruning"};
  app.require_subcommand(1);

  // generate
  auto* gen = app.add_subcommand("generate", "write a corpus of UNSAT formulas");
  cli::GenOptions gen_opts;
  gen_opts.add_to(*gen);
  std::string gen_out;
  std::size_t gen_count = 100;
  std::uint64_t gen_seed = 0;
  gen->add_option("--out", gen_out, "output directory")->required();
  gen->add_option("--count", gen_count)->capture_default_str();
  gen->add_option("--seed", gen_seed)->capture_default_str();

  // train
  auto* tr = app.add_subcommand("train", "train a pruning model with REINFORCE");
  cli::GenOptions tr_gen;
  tr_gen.add_to(*tr);
  TrainConfig tcfg;
  ModelConfig mcfg;
  std::string tr_data, tr_eval, tr_out, tr_history, tr_init;
  std::size_t tr_generate = 0, tr_eval_count = 200;
  tr->add_option("--data", tr_data, "training corpus directory");
  tr->add_option("--generate", tr_generate, "generate this many training formulas instead");
  tr->add_option("--eval", tr_eval, "held-out corpus directory");
  tr->add_option("--eval-count", tr_eval_count, "generated held-out formulas when --eval is absent")
      ->capture_default_str();
  tr->add_option("--out", tr_out, "checkpoint path")->required();
  tr->add_option("--history", tr_history, "per-step CSV log");
  tr->add_option("--init", tr_init, "start from this checkpoint");
  tr->add_option("--batch-size", tcfg.batch_size)->capture_default_str();
  tr->add_option("--lr", tcfg.learning_rate)->capture_default_str();
  tr->add_option("--max-formulas", tcfg.max_formulas)->capture_default_str();
  tr->add_option("--samples", tcfg.samples_per_formula, "masks per formula per step")
      ->capture_default_str();
  tr->add_option("--eval-every", tcfg.eval_every)->capture_default_str();
  tr->add_option("--patience", tcfg.early_stop_window, "evaluations without improvement")
      ->capture_default_str();
  tr->add_option("--min-delta", tcfg.min_delta)->capture_default_str();
  tr->add_option("--eval-samples", tcfg.eval_samples)->capture_default_str();
  tr->add_flag("--baseline", tcfg.use_baseline, "subtract a moving-average loss baseline");
  tr->add_option("--workers", tcfg.workers)->capture_default_str();
  tr->add_option("--seed", tcfg.seed)->capture_default_str();
  tr->add_option("--layers", mcfg.num_layers)->capture_default_str();
  tr->add_option("--hidden", mcfg.hidden_dim)->capture_default_str();
  tr->add_option("--feature-dim", mcfg.random_feature_dim)->capture_default_str();
  tr->add_option("--mlp-hidden", mcfg.mlp_hidden_dim)->capture_default_str();

  // prune
  auto* pr = app.add_subcommand("prune", "prune one DIMACS formula");
  std::string pr_in, pr_out, pr_outcome, pr_method = "model", pr_checkpoint;
  int pr_k = 10, pr_steps = 100;
  double pr_fraction = 0.1;
  std::uint64_t pr_seed = 0;
  bool pr_omit = false;
  pr->add_option("--in", pr_in, "input DIMACS")->required();
  pr->add_option("--out", pr_out, "pruned DIMACS (stdout when absent)");
  pr->add_option("--outcome", pr_outcome, "outcome JSON path (stderr when absent)");
  pr->add_option("--method", pr_method, "model | clause_length | var_freq | random")
      ->capture_default_str();
  pr->add_option("--checkpoint", pr_checkpoint);
  pr->add_option("--k", pr_k, "threshold grid size")->capture_default_str();
  pr->add_option("--steps", pr_steps, "clause length grid size")->capture_default_str();
  pr->add_option("--fraction", pr_fraction, "random pruning fraction")->capture_default_str();
  pr->add_option("--seed", pr_seed)->capture_default_str();
  pr->add_flag("--omit-timings", pr_omit, "leave wall-time fields out of the outcome");

  // enumerate
  auto* en = app.add_subcommand("enumerate", "enumerate MUSes of one DIMACS formula");
  std::string en_in, en_budget = "1s";
  std::size_t en_limit = 0;
  en->add_option("--in", en_in, "input DIMACS")->required();
  en->add_option("--budget", en_budget)->capture_default_str();
  en->add_option("--mus-limit", en_limit, "stop after this many MUSes (0 = no cap)");

  // bench
  auto* be = app.add_subcommand("bench", "enumerate with and without pruning, write reports");
  cli::GenOptions be_gen;
  be_gen.add_to(*be);
  std::string be_problems, be_out, be_checkpoint, be_cmd, be_dataset;
  std::vector<std::string> be_pruners{"none"}, be_budgets{"1s"};
  std::size_t be_generate = 0;
  int be_reps = 1, be_k = 10, be_steps = 100;
  double be_fraction = 0.1;
  std::uint64_t be_seed = 0;
  bool be_omit = false;
  PipelineOptions be_pipe;
  double be_slack_ms = 50;
  int be_workers = workers_from_env(1);
  be->add_option("--problems", be_problems, "corpus directory or single DIMACS file");
  be->add_option("--generate", be_generate, "generate this many problems instead");
  be->add_option("--dataset", be_dataset, "dataset label in reports");
  be->add_option("--pruner", be_pruners, "none | model | clause_length | var_freq | random (repeatable)")
      ->capture_default_str();
  be->add_option("--checkpoint", be_checkpoint);
  be->add_option("--k", be_k)->capture_default_str();
  be->add_option("--steps", be_steps)->capture_default_str();
  be->add_option("--fraction", be_fraction)->capture_default_str();
  be->add_option("--enumerator-cmd", be_cmd,
                 "external enumerator; {cnf}, {timeout}, {timeout_s} are substituted");
  be->add_option("--budget", be_budgets, "wall-clock budgets, e.g. 1s 2s 5s 30min (repeatable)")
      ->capture_default_str();
  be->add_option("--repetitions", be_reps)->capture_default_str();
  be->add_option("--seed", be_seed)->capture_default_str();
  be->add_option("--workers", be_workers, "default from MUSPRUNE_WORKERS")->capture_default_str();
  be->add_option("--audit-sample", be_pipe.audit_sample)->capture_default_str();
  be->add_option("--mus-limit", be_pipe.mus_limit)->capture_default_str();
  be->add_option("--slack-ms", be_slack_ms)->capture_default_str();
  be->add_option("--out", be_out, "report directory")->required();
  be->add_flag("--omit-timings", be_omit, "leave wall-time fields empty");

  // validate
  auto* va = app.add_subcommand("validate", "check pruning and enumeration invariants on a corpus");
  cli::GenOptions va_gen;
  va_gen.add_to(*va);
  std::string va_problems, va_checkpoint, va_budget = "1s";
  std::size_t va_generate = 0, va_limit = 200;
  std::uint64_t va_seed = 0;
  int va_k = 10;
  va->add_option("--problems", va_problems);
  va->add_option("--generate", va_generate);
  va->add_option("--checkpoint", va_checkpoint, "also check the model pruner");
  va->add_option("--k", va_k)->capture_default_str();
  va->add_option("--budget", va_budget, "enumeration budget per formula")->capture_default_str();
  va->add_option("--mus-limit", va_limit)->capture_default_str();
  va->add_option("--seed", va_seed)->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err);
  }

  auto load_problems = [](const std::string& dir, std::size_t generate_count,
                          const cli::GenOptions& g, std::uint64_t seed) {
    if (!dir.empty()) return read_corpus(dir);
    if (generate_count == 0) throw cli::UsageError("give --problems or --generate");
    return cli::generated_problems(g.spec(), seed, generate_count);
  };
  auto load_model = [](const std::string& path) {
    if (path.empty()) throw cli::UsageError("the model pruner needs --checkpoint");
    return std::make_shared<const ModelParams>(load_checkpoint(path));
  };

  try {
    if (*gen) {
      SatEngine engine;
      auto lines = write_corpus(gen_out, gen_opts.spec(), gen_seed, gen_count, engine);
      out << "wrote " << lines.size() << " formulas to " << gen_out << '\n';
      return 0;
    }

    if (*tr) {
      std::vector<CorpusEntry> data_entries =
          load_problems(tr_data, tr_generate, tr_gen, derive_seed(tcfg.seed, 0xda7a));
      std::vector<CorpusEntry> eval_entries =
          tr_eval.empty()
              ? cli::generated_problems(tr_gen.spec(), derive_seed(tcfg.seed, 0xe7a1), tr_eval_count)
              : read_corpus(tr_eval);
      auto data = cli::to_examples(std::move(data_entries));
      auto eval = cli::to_examples(std::move(eval_entries));
      ModelParams init = tr_init.empty() ? init_params(mcfg, derive_seed(tcfg.seed, 0x1417))
                                         : load_checkpoint(tr_init);
      SatEngine engine;
      auto result = train(tcfg, std::move(init), data, eval, engine, [&](const HistoryRow& row) {
        if (row.eval_loss) {
          err << "step " << row.metrics.step << " formulas " << row.formulas_seen << " loss "
              << row.metrics.mean_loss << " eval " << *row.eval_loss << '\n';
        }
      });
      save_checkpoint(tr_out, result.best);
      if (!tr_history.empty()) {
        std::ofstream h(tr_history);
        if (!h) throw Error("cannot write " + tr_history);
        write_history_csv(h, result.history);
      }
      out << "trained on " << result.formulas_seen << " formulas, best eval loss "
          << result.best_eval_loss << (result.stopped_early ? " (early stop)" : "") << '\n';
      return 0;
    }

    if (*pr) {
      const CnfFormula f = read_dimacs_file(pr_in);
      SatEngine engine;
      if (engine.is_satisfiable(f)) throw cli::UsageError("input satisfiable: " + pr_in);
      engine.reset_calls();
      PrunerSpec spec;
      spec.kind = parse_pruner_kind(pr_method);
      spec.k = pr_k;
      spec.steps = pr_steps;
      spec.fraction = pr_fraction;
      if (spec.kind == PrunerKind::Model) spec.model = load_model(pr_checkpoint);
      auto outcome = detail::apply_pruner(f, spec, pr_seed, engine);
      nlohmann::json j;
      j["method"] = outcome.method;
      j["num_clauses"] = f.num_clauses();
      j["kept_clauses"] = outcome.pruned.num_clauses();
      j["kept_fraction"] = outcome.kept_fraction;
      j["sat_calls"] = outcome.sat_calls;
      j["index_map"] = outcome.index_map;
      if (outcome.threshold) j["threshold"] = *outcome.threshold;
      if (outcome.satisfiable) j["satisfiable"] = *outcome.satisfiable;
      if (!pr_omit) j["wall_time_s"] = outcome.wall_time.count();
      if (pr_out.empty()) {
        out << write_dimacs(outcome.pruned);
      } else {
        write_dimacs_file(pr_out, outcome.pruned);
      }
      if (pr_outcome.empty()) {
        err << j.dump() << '\n';
      } else {
        cli::write_text(pr_outcome, j.dump(1) + "\n");
      }
      return 0;
    }

    if (*en) {
      const CnfFormula f = read_dimacs_file(en_in);
      SatEngine engine;
      if (engine.is_satisfiable(f)) throw cli::UsageError("input satisfiable: " + en_in);
      auto trace = enumerate_marco(f, parse_duration(en_budget), {}, en_limit);
      out << "c muses " << trace.muses.size() << " exhausted " << int(trace.exhausted) << '\n';
      for (const auto& m : trace.muses) {
        for (auto i : m.clauses) out << (i + 1) << ' ';
        out << "0\n";
      }
      return 0;
    }

    if (*be) {
      BenchConfig c;
      c.problems = load_problems(be_problems, be_generate, be_gen, be_seed);
      c.dataset = !be_dataset.empty() ? be_dataset
                  : !be_problems.empty()
                      ? std::filesystem::path(be_problems).filename().string()
                      : be_gen.variant;
      if (c.dataset.empty()) c.dataset = "problems";
      std::shared_ptr<const ModelParams> model;
      c.pruners.clear();
      for (const auto& name : be_pruners) {
        PrunerSpec p;
        p.kind = parse_pruner_kind(name);
        p.k = be_k;
        p.steps = be_steps;
        p.fraction = be_fraction;
        if (p.kind == PrunerKind::Model) {
          if (!model) model = load_model(be_checkpoint);
          p.model = model;
        }
        c.pruners.push_back(std::move(p));
      }
      c.enumerator.command = be_cmd;
      c.budgets.clear();
      for (const auto& b : be_budgets) c.budgets.push_back(parse_duration(b));
      c.repetitions = be_reps;
      c.seed = be_seed;
      c.workers = be_workers;
      c.pipeline = be_pipe;
      c.pipeline.slack = Seconds(be_slack_ms / 1000.0);
      auto report = run_benchmark(c);
      emit_report(report, be_out, ReportOptions{be_omit});
      write_markdown(out, report);
      std::size_t failures = 0;
      for (const auto& r : report.records) failures += r.audit_failures;
      if (failures > 0 && be_cmd.empty()) {
        err << "audit: " << failures << " lifted MUSes failed is_mus\n";
        return 2;
      }
      return 0;
    }

    if (*va) {
      auto problems = load_problems(va_problems, va_generate, va_gen, va_seed);
      std::vector<PrunerSpec> pruners;
      for (auto kind : {PrunerKind::ClauseLength, PrunerKind::VarFreq}) {
        PrunerSpec p;
        p.kind = kind;
        p.k = va_k;
        pruners.push_back(p);
      }
      if (!va_checkpoint.empty()) {
        PrunerSpec p;
        p.kind = PrunerKind::Model;
        p.k = va_k;
        p.model = load_model(va_checkpoint);
        pruners.push_back(p);
      }
      const Seconds budget = parse_duration(va_budget);
      std::size_t unsat_fail = 0, audit_fail = 0, call_fail = 0, checked = 0, skipped = 0;
      for (std::size_t i = 0; i < problems.size(); ++i) {
        const auto& f = problems[i].formula;
        SatEngine check;
        if (check.is_satisfiable(f)) {
          ++skipped;
          continue;
        }
        for (const auto& p : pruners) {
          SatEngine engine;
          auto o = detail::apply_pruner(f, p, derive_seed(va_seed, i), engine);
          const int bound = p.kind == PrunerKind::ClauseLength
                                ? static_cast<int>(std::ceil(std::log2(p.steps + 1.0))) + 1
                                : static_cast<int>(std::ceil(std::log2(p.k + 1.0))) + 1;
          if (o.sat_calls > static_cast<std::uint64_t>(bound)) ++call_fail;
          if (!(o.pruned == f) && check.is_satisfiable(o.pruned)) {
            ++unsat_fail;
            err << problems[i].name << ": " << p.label() << " output is satisfiable\n";
            continue;
          }
          auto lifted = lift_muses(enumerate_marco(o.pruned, budget, {}, va_limit), o.index_map);
          SubsetOracle oracle(f);
          for (const auto& m : lifted.muses) {
            ++checked;
            if (!is_mus(oracle, m.clauses)) {
              ++audit_fail;
              err << problems[i].name << ": " << p.label() << " lifted a non-MUS\n";
            }
          }
        }
      }
      out << "formulas " << problems.size() << " skipped_sat " << skipped << '\n'
          << "unsat_preservation failures " << unsat_fail << '\n'
          << "sat_call_bound failures " << call_fail << '\n'
          << "mus_audit checked " << checked << " failures " << audit_fail << '\n';
      return unsat_fail + audit_fail + call_fail == 0 ? 0 : 2;
    }
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 2;
  }
  return 1;
}

}  // namespace musprune
