#pragma once

// Word n-gram extraction and PMI-based keyphrase scoring against a background corpus.

#include <algorithm>
#include <charconv>
#include <cmath>
#include <map>
#include <ostream>
#include <set>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "intendd/corpus.hpp"
#include "intendd/error.hpp"

namespace intendd {

/// Lowercases ASCII and splits on whitespace and ASCII punctuation.
/// Bytes >= 0x80 are kept as word characters so UTF-8 words survive intact.
inline std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> tokens;
  std::string cur;
  for (char ch : text) {
    const auto c = static_cast<unsigned char>(ch);
    const bool word = c >= 0x80 || (c >= '0' && c <= '9') || (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z');
    if (word) {
      cur.push_back(c >= 'A' && c <= 'Z' ? static_cast<char>(c - 'A' + 'a') : static_cast<char>(c));
    } else if (!cur.empty()) {
      tokens.push_back(std::move(cur));
      cur.clear();
    }
  }
  if (!cur.empty()) tokens.push_back(std::move(cur));
  return tokens;
}

/// Distinct n-grams of order 1..n_max, tokens joined by a single space.
inline std::set<std::string> distinct_ngrams(std::string_view text, int n_max) {
  const auto tokens = tokenize(text);
  std::set<std::string> out;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    std::string gram;
    for (int n = 0; n < n_max && i + static_cast<std::size_t>(n) < tokens.size(); ++n) {
      if (n > 0) gram.push_back(' ');
      gram += tokens[i + static_cast<std::size_t>(n)];
      out.insert(gram);
    }
  }
  return out;
}

inline int ngram_length(std::string_view ngram) {
  return ngram.empty() ? 0 : static_cast<int>(std::count(ngram.begin(), ngram.end(), ' ')) + 1;
}

struct NgramStats {
  std::string ngram;
  std::size_t df_target = 0;
  std::size_t df_union = 0;
  std::vector<std::string> postings;  // ids of target utterances containing the n-gram

  int length() const { return ngram_length(ngram); }
};

struct NgramTable {
  std::vector<NgramStats> stats;  // sorted by ngram
  std::size_t n_target = 0;
  std::size_t n_union = 0;
};

inline NgramTable extract_ngrams(const Dataset& ds, const BackgroundCorpus& bg, int n_max = 3) {
  if (n_max < 1) throw std::invalid_argument("n_max must be >= 1");
  NgramTable table;
  table.n_target = ds.size();
  table.n_union = ds.size() + bg.utterances.size();

  std::map<std::string, NgramStats> by_gram;
  for (const auto& u : ds.utterances) {
    for (auto& g : distinct_ngrams(u.text, n_max)) {
      auto& s = by_gram[g];
      ++s.df_target;
      s.postings.push_back(u.id);
    }
  }
  if (by_gram.empty()) return table;
  for (const auto& text : bg.utterances) {
    for (const auto& g : distinct_ngrams(text, n_max)) {
      auto it = by_gram.find(g);
      if (it != by_gram.end()) ++it->second.df_union;
    }
  }
  table.stats.reserve(by_gram.size());
  for (auto& [g, s] : by_gram) {
    s.ngram = g;
    s.df_union += s.df_target;
    table.stats.push_back(std::move(s));
  }
  return table;
}

/// len^2 * ln(df_union) * ln(df_target * n_union / (df_union * n_target)).
inline double score_keyphrase(int length, std::size_t df_target, std::size_t df_union, std::size_t n_target,
                              std::size_t n_union) {
  if (df_union == 0) throw std::invalid_argument("df_union must be positive");
  if (df_target == 0 || n_target == 0 || n_union < n_target)
    throw std::invalid_argument("score_keyphrase: invalid corpus statistics");
  const double ratio = (static_cast<double>(df_target) * static_cast<double>(n_union)) /
                       (static_cast<double>(df_union) * static_cast<double>(n_target));
  const double len = length;
  return len * len * std::log(static_cast<double>(df_union)) * std::log(ratio);
}

inline double score_keyphrase(const NgramStats& s, std::size_t n_target, std::size_t n_union) {
  return score_keyphrase(s.length(), s.df_target, s.df_union, n_target, n_union);
}

struct ScoredKeyphrase {
  std::string ngram;
  double score = 0.0;
  std::size_t df_target = 0;
  std::size_t df_union = 0;
};

/// Descending score, ties broken by lexicographically smaller n-gram first.
inline bool keyphrase_rank_less(const ScoredKeyphrase& a, const ScoredKeyphrase& b) {
  if (a.score != b.score) return a.score > b.score;
  return a.ngram < b.ngram;
}

struct KeyphraseSet {
  std::vector<ScoredKeyphrase> items;
  std::unordered_map<std::string, std::vector<std::string>> inverted_index;

  std::size_t size() const { return items.size(); }
  bool empty() const { return items.empty(); }

  const std::vector<std::string>& postings(const std::string& ngram) const {
    static const std::vector<std::string> none;
    auto it = inverted_index.find(ngram);
    return it == inverted_index.end() ? none : it->second;
  }

  /// Subset keeping only the given n-grams, preserving rank order.
  KeyphraseSet subset(const std::unordered_set<std::string>& keep) const {
    KeyphraseSet out;
    for (const auto& k : items) {
      if (!keep.count(k.ngram)) continue;
      out.items.push_back(k);
      out.inverted_index.emplace(k.ngram, postings(k.ngram));
    }
    return out;
  }

  /// Max n-gram order present in the set.
  int max_order() const {
    int m = 1;
    for (const auto& k : items) m = std::max(m, ngram_length(k.ngram));
    return m;
  }
};

inline KeyphraseSet build_keyphrase_set(const NgramTable& table, std::size_t min_df = 5, std::size_t top_k = 2000) {
  if (min_df < 1) throw std::invalid_argument("min_df must be >= 1");
  if (top_k < 1) throw std::invalid_argument("top_k must be >= 1");
  KeyphraseSet set;
  std::unordered_map<std::string, const NgramStats*> source;
  for (const auto& s : table.stats) {
    if (s.df_target < min_df) continue;
    const double score = score_keyphrase(s, table.n_target, table.n_union);
    if (!(score > 0.0)) continue;
    set.items.push_back({s.ngram, score, s.df_target, s.df_union});
    source.emplace(s.ngram, &s);
  }
  std::sort(set.items.begin(), set.items.end(), keyphrase_rank_less);
  if (set.items.size() > top_k) set.items.resize(top_k);
  for (const auto& k : set.items) set.inverted_index.emplace(k.ngram, source.at(k.ngram)->postings);
  return set;
}

/// Re-attaches postings for a set whose items were loaded from a dump.
inline void index_keyphrases(KeyphraseSet& set, const Dataset& ds) {
  set.inverted_index.clear();
  int n_max = set.max_order();
  std::unordered_set<std::string> wanted;
  for (const auto& k : set.items) {
    wanted.insert(k.ngram);
    set.inverted_index[k.ngram];
  }
  for (const auto& u : ds.utterances)
    for (const auto& g : distinct_ngrams(u.text, n_max))
      if (wanted.count(g)) set.inverted_index[g].push_back(u.id);
}

/// TSV dump: "ngram\tscore\tdf_target\tdf_union".
inline void write_keyphrase_tsv(std::ostream& out, const KeyphraseSet& set) {
  char buf[64];
  for (const auto& k : set.items) {
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, k.score);
    out << k.ngram << '\t' << std::string_view(buf, static_cast<std::size_t>(ptr - buf)) << '\t' << k.df_target
        << '\t' << k.df_union << '\n';
  }
}

inline KeyphraseSet read_keyphrase_tsv(std::istream& in) {
  KeyphraseSet set;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::vector<std::string> cols;
    std::size_t start = 0;
    for (;;) {
      auto tab = line.find('\t', start);
      cols.push_back(line.substr(start, tab - start));
      if (tab == std::string::npos) break;
      start = tab + 1;
    }
    if (cols.size() != 4) throw DataError("keyphrase TSV line " + std::to_string(line_no) + ": expected 4 columns");
    ScoredKeyphrase k;
    k.ngram = cols[0];
    try {
      k.score = std::stod(cols[1]);
      k.df_target = std::stoull(cols[2]);
      k.df_union = std::stoull(cols[3]);
    } catch (const std::exception&) {
      throw DataError("keyphrase TSV line " + std::to_string(line_no) + ": bad number");
    }
    set.items.push_back(std::move(k));
  }
  std::sort(set.items.begin(), set.items.end(), keyphrase_rank_less);
  return set;
}

}  // namespace intendd
