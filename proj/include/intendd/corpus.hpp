#pragma once

// Dataset and embedding ingestion, splits, label vocabularies and seed masks.

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <numeric>
#include <optional>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include <json.hpp>

#include "intendd/error.hpp"

namespace intendd {

using LabelId = int;
using LabelSet = std::vector<LabelId>;  // sorted, unique

enum class Split { train, validation, test, unlabeled };

inline std::string_view to_string(Split s) {
  switch (s) {
    case Split::train: return "train";
    case Split::validation: return "validation";
    case Split::test: return "test";
    case Split::unlabeled: return "unlabeled";
  }
  return "unlabeled";
}

inline std::optional<Split> parse_split(std::string_view s) {
  if (s == "train") return Split::train;
  if (s == "validation") return Split::validation;
  if (s == "test") return Split::test;
  if (s == "unlabeled") return Split::unlabeled;
  return std::nullopt;
}

struct Utterance {
  std::string id;
  std::string text;
  LabelSet labels;
  Split split = Split::unlabeled;
};

struct Dataset {
  std::vector<Utterance> utterances;
  std::vector<std::string> label_vocab;
  int num_intents = 0;  // K

  std::size_t size() const { return utterances.size(); }

  std::optional<std::size_t> index_of(std::string_view id) const {
    for (std::size_t i = 0; i < utterances.size(); ++i)
      if (utterances[i].id == id) return i;
    return std::nullopt;
  }

  /// id -> position; rebuilt on each call, callers cache it.
  std::unordered_map<std::string, std::size_t> index() const {
    std::unordered_map<std::string, std::size_t> out;
    out.reserve(utterances.size());
    for (std::size_t i = 0; i < utterances.size(); ++i) out.emplace(utterances[i].id, i);
    return out;
  }

  bool is_multilabel() const {
    return std::any_of(utterances.begin(), utterances.end(),
                       [](const Utterance& u) { return u.labels.size() > 1; });
  }
};

struct BackgroundCorpus {
  std::vector<std::string> utterances;
};

struct EmbeddingTable {
  std::size_t dim = 0;
  std::unordered_map<std::string, std::vector<double>> vectors;

  const std::vector<double>& at(const std::string& id) const {
    auto it = vectors.find(id);
    if (it == vectors.end()) throw DataError("missing embedding for id '" + id + "'");
    return it->second;
  }
  bool contains(const std::string& id) const { return vectors.count(id) != 0; }
  std::size_t size() const { return vectors.size(); }
};

struct SeedMask {
  std::set<std::string> labeled_ids;
  std::set<LabelId> known_intents;

  bool empty() const { return labeled_ids.empty(); }
};

// ---------------------------------------------------------------------------
// Dataset JSONL

inline Dataset parse_dataset(std::istream& in, std::optional<int> num_intents = std::nullopt) {
  Dataset ds;
  std::unordered_set<std::string> seen;
  std::unordered_map<std::string, LabelId> vocab;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const auto where = "line " + std::to_string(line_no);
    nlohmann::json rec;
    try {
      rec = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw DataError(where + ": invalid JSON (" + e.what() + ")");
    }
    if (!rec.is_object()) throw DataError(where + ": record is not an object");
    for (const char* key : {"id", "text", "labels", "split"})
      if (!rec.contains(key)) throw DataError(where + ": missing field \"" + key + "\"");
    if (!rec["id"].is_string() || !rec["text"].is_string() || !rec["labels"].is_array() ||
        !rec["split"].is_string())
      throw DataError(where + ": field has wrong type");

    Utterance u;
    u.id = rec["id"].get<std::string>();
    u.text = rec["text"].get<std::string>();
    auto split = parse_split(rec["split"].get<std::string>());
    if (!split) throw DataError(where + ": unknown split \"" + rec["split"].get<std::string>() + "\"");
    u.split = *split;
    for (const auto& l : rec["labels"]) {
      if (!l.is_string()) throw DataError(where + ": label is not a string");
      auto name = l.get<std::string>();
      auto [it, inserted] = vocab.emplace(name, static_cast<LabelId>(ds.label_vocab.size()));
      if (inserted) ds.label_vocab.push_back(name);
      u.labels.push_back(it->second);
    }
    std::sort(u.labels.begin(), u.labels.end());
    u.labels.erase(std::unique(u.labels.begin(), u.labels.end()), u.labels.end());
    if (!seen.insert(u.id).second) throw DataError(where + ": duplicate id '" + u.id + "'");
    ds.utterances.push_back(std::move(u));
  }
  ds.num_intents = num_intents.value_or(static_cast<int>(ds.label_vocab.size()));
  return ds;
}

inline Dataset load_dataset(const std::string& path, std::optional<int> num_intents = std::nullopt) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open dataset '" + path + "'");
  try {
    return parse_dataset(in, num_intents);
  } catch (const DataError& e) {
    throw DataError(path + ": " + e.what());
  }
}

inline void write_dataset(std::ostream& out, const Dataset& ds) {
  for (const auto& u : ds.utterances) {
    nlohmann::json labels = nlohmann::json::array();
    for (LabelId l : u.labels) labels.push_back(ds.label_vocab.at(static_cast<std::size_t>(l)));
    nlohmann::json rec = {{"id", u.id}, {"text", u.text}, {"labels", labels}, {"split", to_string(u.split)}};
    out << rec.dump() << '\n';
  }
}

inline BackgroundCorpus load_background(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open background corpus '" + path + "'");
  BackgroundCorpus bg;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    bg.utterances.push_back(std::move(line));
  }
  return bg;
}

// ---------------------------------------------------------------------------
// Embedding table: "#dim=<D>" header then "<id>\t<f1>\t...\t<fD>" rows.

inline EmbeddingTable parse_embeddings(std::istream& in) {
  EmbeddingTable table;
  std::string line;
  if (!std::getline(in, line)) throw DataError("embedding table is empty (missing #dim header)");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  constexpr std::string_view prefix = "#dim=";
  if (line.rfind(prefix, 0) != 0) throw DataError("embedding table header must be \"#dim=<D>\"");
  {
    const char* first = line.data() + prefix.size();
    const char* last = line.data() + line.size();
    auto [ptr, ec] = std::from_chars(first, last, table.dim);
    if (ec != std::errc{} || ptr != last || table.dim == 0)
      throw DataError("invalid dimension in header \"" + line + "\"");
  }
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto tab = line.find('\t');
    std::string id = line.substr(0, tab);
    if (id.empty()) throw DataError("line " + std::to_string(line_no) + ": empty id");
    std::vector<double> v;
    v.reserve(table.dim);
    while (tab != std::string::npos) {
      const auto start = tab + 1;
      tab = line.find('\t', start);
      const auto end = tab == std::string::npos ? line.size() : tab;
      double x = 0.0;
      auto [ptr, ec] = std::from_chars(line.data() + start, line.data() + end, x);
      if (ec != std::errc{} || ptr != line.data() + end)
        throw DataError("row '" + id + "': unparsable value '" + line.substr(start, end - start) + "'");
      if (!std::isfinite(x)) throw DataError("row '" + id + "': non-finite value");
      v.push_back(x);
    }
    if (v.size() != table.dim)
      throw DataError("row '" + id + "': expected " + std::to_string(table.dim) + " values, got " +
                      std::to_string(v.size()));
    if (!table.vectors.emplace(id, std::move(v)).second)
      throw DataError("row '" + id + "': duplicate id");
  }
  return table;
}

inline EmbeddingTable load_embeddings(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open embeddings '" + path + "'");
  try {
    return parse_embeddings(in);
  } catch (const DataError& e) {
    throw DataError(path + ": " + e.what());
  }
}

inline void write_embeddings(std::ostream& out, const EmbeddingTable& table,
                             const std::vector<std::string>& order) {
  out << "#dim=" << table.dim << '\n';
  char buf[32];
  for (const auto& id : order) {
    out << id;
    for (double x : table.at(id)) {
      auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, x);
      out << '\t' << std::string_view(buf, static_cast<std::size_t>(ptr - buf));
    }
    out << '\n';
  }
}

// ---------------------------------------------------------------------------
// Seed masks for known-intent-ratio (KIR) settings.

inline SeedMask make_seed_mask(const Dataset& ds, double kir, double labeled_fraction,
                               std::uint64_t rng_seed) {
  if (!(kir >= 0.0 && kir <= 1.0)) throw std::invalid_argument("kir must lie in [0,1]");
  if (!(labeled_fraction > 0.0 && labeled_fraction <= 1.0))
    throw std::invalid_argument("labeled_fraction must lie in (0,1]");
  SeedMask mask;
  if (kir == 0.0) return mask;

  std::mt19937_64 rng(rng_seed);
  std::vector<LabelId> labels(static_cast<std::size_t>(ds.num_intents));
  std::iota(labels.begin(), labels.end(), 0);
  std::shuffle(labels.begin(), labels.end(), rng);
  const auto n_known = static_cast<std::size_t>(std::floor(kir * ds.num_intents + 1e-9));
  mask.known_intents.insert(labels.begin(), labels.begin() + static_cast<std::ptrdiff_t>(n_known));

  // Eligible train utterances grouped by their smallest label.
  std::map<LabelId, std::vector<std::size_t>> by_class;
  for (std::size_t i = 0; i < ds.utterances.size(); ++i) {
    const auto& u = ds.utterances[i];
    if (u.split != Split::train || u.labels.empty()) continue;
    const bool known = std::all_of(u.labels.begin(), u.labels.end(),
                                   [&](LabelId l) { return mask.known_intents.count(l) != 0; });
    if (known) by_class[u.labels.front()].push_back(i);
  }
  if (by_class.empty()) throw DataError("kir > 0 but no train utterance carries a known intent");

  for (auto& [label, members] : by_class) {
    std::shuffle(members.begin(), members.end(), rng);
    auto take = static_cast<std::size_t>(std::llround(labeled_fraction * static_cast<double>(members.size())));
    take = std::clamp<std::size_t>(take, 1, members.size());
    for (std::size_t j = 0; j < take; ++j) mask.labeled_ids.insert(ds.utterances[members[j]].id);
  }
  return mask;
}

/// Deterministic per-class subsample of train utterances (few-shot protocol).
inline SeedMask make_shot_mask(const Dataset& ds, int shots, std::uint64_t rng_seed) {
  SeedMask mask;
  std::mt19937_64 rng(rng_seed);
  std::map<LabelId, std::vector<std::size_t>> by_class;
  for (std::size_t i = 0; i < ds.utterances.size(); ++i) {
    const auto& u = ds.utterances[i];
    if (u.split == Split::train && !u.labels.empty()) by_class[u.labels.front()].push_back(i);
  }
  for (auto& [label, members] : by_class) {
    mask.known_intents.insert(label);
    if (shots > 0) std::shuffle(members.begin(), members.end(), rng);
    const std::size_t take = shots > 0 ? std::min<std::size_t>(static_cast<std::size_t>(shots), members.size())
                                       : members.size();
    for (std::size_t j = 0; j < take; ++j) mask.labeled_ids.insert(ds.utterances[members[j]].id);
  }
  return mask;
}

}  // namespace intendd
