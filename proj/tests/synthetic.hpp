#pragma once

// Synthetic corpora and graphs shared by unit tests and the acceptance binary.

#include <cmath>
#include <random>
#include <string>
#include <vector>

#include "intendd/intendd.hpp"

namespace synth {

inline const std::vector<std::vector<std::string>>& vocabularies() {
  static const std::vector<std::vector<std::string>> v = {
      {"flight", "ticket", "airport", "boarding", "luggage", "seat"},
      {"song", "playlist", "album", "volume", "lyrics", "radio"},
      {"weather", "forecast", "rain", "umbrella", "sunny", "temperature"},
      {"balance", "transfer", "deposit", "account", "invoice", "refund"},
  };
  return v;
}

inline const std::vector<std::string>& fillers() {
  static const std::vector<std::string> f = {"please", "can", "you", "me", "the", "now", "help", "i", "want", "my"};
  return f;
}

struct Corpus {
  intendd::Dataset ds;
  intendd::BackgroundCorpus bg;
  intendd::EmbeddingTable emb;
  std::vector<int> group;  // gold group per utterance
};

/// `groups` intents x `per_group` utterances. Each utterance draws three words from
/// its group vocabulary plus fillers; the background uses fillers only. Embeddings
/// are Gaussian around orthogonal centroids separated by `separation` sigmas.
inline Corpus make_corpus(int groups, int per_group, std::size_t dim, double separation, std::uint64_t seed,
                          bool with_labels = true) {
  std::mt19937_64 rng(seed);
  Corpus c;
  c.emb.dim = dim;
  std::normal_distribution<double> noise(0.0, 1.0);
  const double radius = separation / std::sqrt(2.0);
  for (int g = 0; g < groups; ++g) c.ds.label_vocab.push_back("intent_" + std::to_string(g));
  const auto& f = fillers();
  for (int g = 0; g < groups; ++g) {
    const auto& vocab = vocabularies()[static_cast<std::size_t>(g) % vocabularies().size()];
    std::uniform_int_distribution<std::size_t> pick(0, vocab.size() - 1), pick_f(0, f.size() - 1);
    for (int i = 0; i < per_group; ++i) {
      intendd::Utterance u;
      u.id = "g" + std::to_string(g) + "_" + std::to_string(i);
      u.text = f[pick_f(rng)] + " " + vocab[pick(rng)] + " " + f[pick_f(rng)] + " " + vocab[pick(rng)] + " " +
               vocab[pick(rng)];
      if (with_labels) u.labels = {g};
      u.split = i % 5 == 4 ? intendd::Split::test : intendd::Split::train;
      c.ds.utterances.push_back(u);
      c.group.push_back(g);
      std::vector<double> v(dim);
      for (std::size_t d = 0; d < dim; ++d) v[d] = noise(rng);
      v[static_cast<std::size_t>(g) % dim] += radius;
      c.emb.vectors.emplace(u.id, std::move(v));
    }
  }
  c.ds.num_intents = groups;
  std::uniform_int_distribution<std::size_t> pick_f(0, f.size() - 1);
  for (int i = 0; i < 4 * groups * per_group; ++i)
    c.bg.utterances.push_back(f[pick_f(rng)] + " " + f[pick_f(rng)] + " " + f[pick_f(rng)]);
  return c;
}

/// Two-cluster homophilous fixture for post-processing. Nodes 0..19 are class 0,
/// 20..39 class 1; even nodes are train, odd nodes test. The base model is right
/// with confidence 0.8 except on 30% of class 1, where it prefers class 0.
struct Homophilous {
  intendd::Dataset ds;
  intendd::WeightedGraph graph;
  intendd::PredictionMatrix base;
  std::set<std::string> train_ids;
  std::vector<std::size_t> test_rows;
};

inline Homophilous make_homophilous(std::uint64_t seed = 7) {
  constexpr std::size_t n = 40, half = 20;
  std::mt19937_64 rng(seed);
  Homophilous h;
  h.ds.label_vocab = {"a", "b"};
  h.ds.num_intents = 2;
  std::vector<intendd::Node> nodes;
  for (std::size_t i = 0; i < n; ++i) {
    intendd::Utterance u;
    u.id = "n" + std::to_string(i);
    u.text = u.id;
    u.labels = {i < half ? 0 : 1};
    u.split = i % 2 == 0 ? intendd::Split::train : intendd::Split::test;
    if (u.split == intendd::Split::train) h.train_ids.insert(u.id);
    else h.test_rows.push_back(i);
    h.ds.utterances.push_back(u);
    nodes.push_back({i, {u.id}, std::nullopt});
  }
  h.graph = intendd::WeightedGraph(nodes, intendd::GraphKind::blended_G_pred);
  std::uniform_real_distribution<double> strong(0.6, 1.0);
  std::uniform_int_distribution<std::size_t> other(0, half - 1);
  for (std::size_t c = 0; c < 2; ++c)
    for (std::size_t i = 0; i < half; ++i) {
      const std::size_t u = c * half + i;
      const std::size_t ring = c * half + (i + 1) % half;
      const double w = strong(rng);
      h.graph.set(u, ring, w);
      h.graph.set(ring, u, w);
      for (int k = 0; k < 3; ++k) {
        const std::size_t v = c * half + other(rng);
        if (v == u) continue;
        const double x = strong(rng);
        h.graph.set(u, v, x);
        h.graph.set(v, u, x);
      }
    }
  for (std::size_t i = 0; i < 3; ++i) {  // weak cross-cluster links
    h.graph.set(i * 5, half + i * 5, 0.05);
    h.graph.set(half + i * 5, i * 5, 0.05);
  }

  h.base.mode = intendd::TaskMode::multiclass;
  h.base.scores.resize(static_cast<Eigen::Index>(n), 2);
  for (std::size_t i = 0; i < n; ++i) {
    h.base.ids.push_back(h.ds.utterances[i].id);
    const bool wrong = i >= half && (i - half) % 10 < 3;  // 6 of 20 class-1 nodes
    Eigen::RowVector2d row;
    if (i < half) row << 0.8, 0.2;
    else if (wrong) row << 0.65, 0.35;
    else row << 0.2, 0.8;
    h.base.scores.row(static_cast<Eigen::Index>(i)) = row;
  }
  return h;
}

inline double accuracy_on(const Homophilous& h, const intendd::PredictionMatrix& p) {
  const auto decided = intendd::decide(p, intendd::TaskMode::multiclass);
  std::size_t hit = 0;
  for (auto r : h.test_rows) hit += decided[r] == h.ds.utterances[r].labels;
  return static_cast<double>(hit) / static_cast<double>(h.test_rows.size());
}

}  // namespace synth
