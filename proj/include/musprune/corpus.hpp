#pragma once

// Corpus directories: DIMACS files plus manifest.jsonl, one JSON object per
// formula (file, spec, seed, N, M, sat_calls).

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "musprune/cnf.hpp"
#include "musprune/generators.hpp"
#include "musprune/random.hpp"

namespace musprune {

inline nlohmann::json to_json(const GenSpec& s) {
  nlohmann::json j;
  j["variant"] = to_string(s.variant);
  switch (s.variant) {
    case GenVariant::SrRandom:
      j["min_vars"] = s.min_vars;
      j["max_vars"] = s.max_vars;
      j["bernoulli_p"] = s.bernoulli_p;
      j["geometric_p"] = s.geometric_p;
      break;
    case GenVariant::StatMatched: {
      const auto& m = s.stat_matched;
      nlohmann::json hist = nlohmann::json::object();
      for (auto [len, count] : m.target.clause_length_histogram) hist[std::to_string(len)] = count;
      j["length_histogram"] = hist;
      j["ratio"] = m.target.clause_to_variable_ratio;
      j["min_vars"] = m.min_vars;
      j["max_vars"] = m.max_vars;
      j["lower_bound_factor"] = m.lower_bound_factor;
      break;
    }
    case GenVariant::GraphColoring:
      j["min_nodes"] = s.coloring.min_nodes;
      j["max_nodes"] = s.coloring.max_nodes;
      j["edge_p"] = s.coloring.edge_p;
      j["min_colors"] = s.coloring.min_colors;
      j["max_colors"] = s.coloring.max_colors;
      break;
  }
  return j;
}

struct CorpusEntry {
  std::string name;
  CnfFormula formula;
};

inline std::string corpus_file_name(std::size_t index) {
  std::ostringstream s;
  s << std::setw(5) << std::setfill('0') << index << ".cnf";
  return s.str();
}

/// Generates `count` formulas with per-instance seeds derive_seed(seed, i) and
/// writes them under `dir`. Returns the manifest lines.
inline std::vector<nlohmann::json> write_corpus(const std::filesystem::path& dir,
                                                const GenSpec& spec, std::uint64_t seed,
                                                std::size_t count, SatEngine& engine) {
  std::filesystem::create_directories(dir);
  std::ofstream manifest(dir / "manifest.jsonl");
  if (!manifest) throw Error("cannot write " + (dir / "manifest.jsonl").string());
  std::vector<nlohmann::json> lines;
  const auto spec_json = to_json(spec);
  for (std::size_t i = 0; i < count; ++i) {
    const auto instance_seed = derive_seed(seed, i);
    auto g = generate(spec, instance_seed, engine);
    const auto name = corpus_file_name(i);
    std::ofstream out(dir / name);
    if (!out) throw Error("cannot write " + (dir / name).string());
    out << write_dimacs(g.formula);
    nlohmann::json line;
    line["file"] = name;
    line["spec"] = spec_json;
    line["seed"] = instance_seed;
    line["N"] = g.formula.num_vars();
    line["M"] = g.formula.num_clauses();
    line["sat_calls"] = g.sat_calls;
    if (spec.variant == GenVariant::GraphColoring) {
      line["nodes"] = g.graph_nodes;
      line["edges"] = g.graph_edges;
      line["colors"] = g.colors;
    }
    manifest << line.dump() << '\n';
    lines.push_back(std::move(line));
  }
  return lines;
}

inline CnfFormula read_dimacs_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path.string());
  try {
    return parse_dimacs(in);
  } catch (const ParseError& e) {
    throw Error(path.string() + ": " + e.what());
  }
}

inline void write_dimacs_file(const std::filesystem::path& path, const CnfFormula& f) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  out << write_dimacs(f);
}

/// Reads the files listed in manifest.jsonl, or every *.cnf in name order
/// when there is no manifest. A single file path yields one entry.
inline std::vector<CorpusEntry> read_corpus(const std::filesystem::path& path) {
  std::vector<CorpusEntry> out;
  if (std::filesystem::is_regular_file(path)) {
    out.push_back({path.filename().string(), read_dimacs_file(path)});
    return out;
  }
  if (!std::filesystem::is_directory(path)) throw Error("no such corpus: " + path.string());
  std::vector<std::string> names;
  if (std::ifstream manifest(path / "manifest.jsonl"); manifest) {
    std::string line;
    while (std::getline(manifest, line)) {
      if (line.empty()) continue;
      names.push_back(nlohmann::json::parse(line).at("file").get<std::string>());
    }
  } else {
    for (const auto& e : std::filesystem::directory_iterator(path)) {
      if (e.is_regular_file() && e.path().extension() == ".cnf") {
        names.push_back(e.path().filename().string());
      }
    }
    std::sort(names.begin(), names.end());
  }
  for (const auto& n : names) out.push_back({n, read_dimacs_file(path / n)});
  return out;
}

}  // namespace musprune
