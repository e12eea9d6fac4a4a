#include <gtest/gtest.h>

#include <random>

#include "intendd/discovery.hpp"
#include "intendd/feature_select.hpp"
#include "oracles.hpp"
#include "synthetic.hpp"

using namespace intendd;

namespace {

KeyphraseSet keyphrases(const synth::Corpus& c) { return build_keyphrase_set(extract_ngrams(c.ds, c.bg), 3); }

std::vector<int> gold(const synth::Corpus& c) { return c.group; }

}  // namespace

TEST(Discover, TwoSeparatedGroupsRecovered) {
  auto c = synth::make_corpus(2, 15, 16, 8.0, 1);
  auto r = discover(c.ds, c.emb, keyphrases(c), {});
  EXPECT_EQ(r.num_clusters, 2u);
  EXPECT_DOUBLE_EQ(clustering_accuracy(r.clusters_for(c.ds), gold(c)), 1.0);
}

TEST(Discover, FullSeedGivesGoldPartition) {
  auto c = synth::make_corpus(3, 10, 16, 8.0, 2);
  for (auto& u : c.ds.utterances) u.split = Split::train;
  auto mask = make_seed_mask(c.ds, 1.0, 1.0, 0);
  auto r = discover(c.ds, c.emb, keyphrases(c), mask);
  EXPECT_EQ(r.num_clusters, 3u);
  EXPECT_DOUBLE_EQ(clustering_accuracy(r.clusters_for(c.ds), gold(c)), 1.0);
}

TEST(Discover, SeedsSharingLabelShareCluster) {
  auto c = synth::make_corpus(3, 20, 16, 4.0, 3);
  auto mask = make_seed_mask(c.ds, 0.75, 0.3, 3);
  auto r = discover(c.ds, c.emb, keyphrases(c), mask);
  const auto a = r.assignment();
  std::map<LabelId, std::set<std::size_t>> seen;
  for (const auto& id : mask.labeled_ids) seen[c.ds.utterances[*c.ds.index_of(id)].labels.front()].insert(a.at(id));
  for (const auto& [l, clusters] : seen) EXPECT_EQ(clusters.size(), 1u);
}

TEST(Discover, SingleUtterance) {
  auto c = synth::make_corpus(1, 1, 4, 8.0, 4);
  auto r = discover(c.ds, c.emb, {}, {});
  EXPECT_EQ(r.num_clusters, 1u);
  EXPECT_FALSE(r.quality.has_value());
}

TEST(Discover, EmptyDatasetRejected) { EXPECT_THROW(discover({}, {}, {}, {}), DataError); }

TEST(Discover, DeterministicAndCountsConsistent) {
  auto c = synth::make_corpus(3, 12, 16, 3.0, 5);
  auto kp = keyphrases(c);
  auto a = discover(c.ds, c.emb, kp, {}), b = discover(c.ds, c.emb, kp, {});
  EXPECT_EQ(a.clusters, b.clusters);
  EXPECT_EQ(a.alpha_used, b.alpha_used);
  std::set<std::size_t> distinct(a.clusters.begin(), a.clusters.end());
  EXPECT_EQ(distinct.size(), a.num_clusters);
}

TEST(Discover, MultilabelSeedFallsBackToSingletons) {
  auto c = synth::make_corpus(2, 6, 8, 8.0, 6);
  c.ds.utterances[0].labels = {0, 1};
  SeedMask mask{{c.ds.utterances[0].id, c.ds.utterances[1].id}, {0, 1}};
  auto r = discover(c.ds, c.emb, keyphrases(c), mask);
  EXPECT_EQ(r.g_pred.num_nodes(), c.ds.size());
}

TEST(AlphaSearch, SingletonGrid) {
  auto c = synth::make_corpus(2, 8, 8, 8.0, 7);
  const auto nodes = singleton_nodes(c.ds);
  auto w = lexical_view(build_lexical_graph(nodes, keyphrases(c)));
  auto a = build_similarity_graph(nodes, c.emb);
  EXPECT_EQ(tune_alpha(w, a, {0.3}), 0.3);
}

TEST(AlphaSearch, TiesPreferSmallerAlpha) {
  // Identical W and A make every alpha produce the same graph and silhouette.
  auto c = synth::make_corpus(2, 8, 8, 8.0, 8);
  const auto nodes = singleton_nodes(c.ds);
  auto a = build_similarity_graph(nodes, c.emb);
  auto w = a;
  w.kind = GraphKind::lexical_W;
  EXPECT_EQ(tune_alpha(w, a, {0.7, 0.2, 0.9}), 0.2);
}

TEST(AlphaSearch, InformativeEmbeddingsPullAlphaUp) {
  // Random keyphrase assignment (noise W) with well-separated embeddings.
  auto c = synth::make_corpus(3, 12, 16, 10.0, 9);
  std::mt19937_64 rng(9);
  const auto& vocab = synth::vocabularies();
  for (auto& u : c.ds.utterances) {
    u.text.clear();
    for (int k = 0; k < 3; ++k) {
      const auto& v = vocab[rng() % 3];
      u.text += v[rng() % v.size()] + " ";
    }
  }
  const auto nodes = singleton_nodes(c.ds);
  auto w = lexical_view(build_lexical_graph(nodes, keyphrases(c)));
  auto a = build_similarity_graph(nodes, c.emb);
  auto search = tune_alpha_detailed(w, a, default_alpha_grid());
  EXPECT_GE(search.alpha, 0.5);
  // The chosen alpha carries the maximum silhouette over the grid.
  for (const auto& cand : search.candidates)
    if (cand.silhouette) {
      const auto& chosen = *std::find_if(search.candidates.begin(), search.candidates.end(),
                                         [&](const auto& x) { return x.alpha == search.alpha; });
      EXPECT_GE(*chosen.silhouette, *cand.silhouette);
    }
}

TEST(AlphaSearch, UndefinedEverywhereFallsBack) {
  std::vector<Node> nodes = {{0, {"a"}, std::nullopt}, {1, {"b"}, std::nullopt}};
  WeightedGraph w(nodes, GraphKind::lexical_W), a(nodes, GraphKind::similarity_A);
  w.set(0, 1, 1);
  w.set(1, 0, 1);
  a = w;
  auto s = tune_alpha_detailed(w, a, {0.1, 0.4});
  EXPECT_TRUE(s.fallback);
  EXPECT_EQ(s.alpha, 0.5);
}

TEST(AssignNew, EmptyNewSetUnchanged) {
  auto c = synth::make_corpus(2, 8, 16, 8.0, 10);
  auto kp = keyphrases(c);
  auto r = discover(c.ds, c.emb, kp, {});
  auto r2 = assign_new(r, {}, c.emb, kp);
  EXPECT_EQ(r2.clusters, r.clusters);
  EXPECT_EQ(r2.ids, r.ids);
}

TEST(AssignNew, DuplicateJoinsTwin) {
  auto c = synth::make_corpus(2, 8, 16, 8.0, 11);
  auto kp = keyphrases(c);
  auto r = discover(c.ds, c.emb, kp, {});
  const auto& twin = c.ds.utterances[5];
  c.emb.vectors["dup"] = c.emb.at(twin.id);
  auto r2 = assign_new(r, {{"dup", twin.text, {}, Split::unlabeled}}, c.emb, kp);
  const auto a = r2.assignment();
  EXPECT_EQ(a.at("dup"), a.at(twin.id));
  // Existing utterances keep their cluster ids.
  const auto before = r.assignment();
  for (const auto& [id, cl] : before) EXPECT_EQ(a.at(id), cl);
}

TEST(AssignNew, IsolatedUtteranceGetsOwnCluster) {
  auto c = synth::make_corpus(2, 8, 16, 8.0, 12);
  for (auto& [id, v] : c.emb.vectors) v[15] = 0.0;
  auto kp = keyphrases(c);
  auto r = discover(c.ds, c.emb, kp, {});
  std::vector<double> lone(16, 0.0);
  lone[15] = 1.0;
  c.emb.vectors["lone"] = lone;
  auto r2 = assign_new(r, {{"lone", "qqq zzz", {}, Split::unlabeled}}, c.emb, kp);
  const auto a = r2.assignment();
  for (const auto& u : c.ds.utterances) EXPECT_NE(a.at("lone"), a.at(u.id));
  EXPECT_EQ(r2.num_clusters, r.num_clusters + 1);
}

TEST(AssignNew, DuplicateMatchesExhaustiveOptimum) {
  // Five-node graph: two pairs plus a twin of node 0; exhaustive search puts the twin with node 0.
  oracle::Dense a = {{0, 1, 0.05, 0, 1}, {1, 0, 0, 0.05, 0.9}, {0.05, 0, 0, 1, 0}, {0, 0.05, 1, 0, 0}, {1, 0.9, 0, 0, 0}};
  double best = -1;
  std::vector<std::size_t> arg;
  oracle::for_each_partition(5, [&](const std::vector<std::size_t>& p) {
    const double q = oracle::modularity(a, p);
    if (q > best) best = q, arg = p;
  });
  EXPECT_EQ(arg[4], arg[0]);
  std::vector<Node> nodes;
  for (std::size_t i = 0; i < 5; ++i) nodes.push_back({i, {"n" + std::to_string(i)}, std::nullopt});
  WeightedGraph g(nodes, GraphKind::blended_G_pred);
  for (std::size_t i = 0; i < 5; ++i)
    for (std::size_t j = 0; j < 5; ++j)
      if (a[i][j] > 0) g.set(i, j, a[i][j]);
  auto p = louvain(g);
  EXPECT_EQ(p.assignment[4], p.assignment[0]);
}

TEST(Pipeline, RfeThenDiscover) {
  auto c = synth::make_corpus(3, 15, 16, 8.0, 13);
  auto candidates = keyphrases(c);
  auto selected = rfe_select(singleton_nodes(c.ds), candidates, 3);
  auto r = discover(c.ds, c.emb, selected, {});
  EXPECT_GE(clustering_accuracy(r.clusters_for(c.ds), gold(c)), 0.95);
}
