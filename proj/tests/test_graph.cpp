#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <set>
#include <sstream>

#include "intendd/graph.hpp"
#include "synthetic.hpp"

using namespace intendd;

namespace {

Dataset small_dataset() {
  Dataset ds;
  ds.label_vocab = {"x", "y"};
  ds.num_intents = 2;
  const std::vector<std::pair<std::string, LabelSet>> rows = {
      {"a", {0}}, {"b", {0}}, {"c", {1}}, {"d", {1}}, {"e", {}}, {"f", {}}, {"g", {}}, {"h", {}}, {"i", {}}, {"j", {}}};
  for (const auto& [id, l] : rows) ds.utterances.push_back({id, id, l, l.empty() ? Split::unlabeled : Split::train});
  return ds;
}

KeyphraseSet manual_set(const std::vector<std::tuple<std::string, double, std::vector<std::string>>>& items) {
  KeyphraseSet s;
  for (const auto& [g, score, ids] : items) {
    s.items.push_back({g, score, ids.size(), ids.size()});
    s.inverted_index[g] = ids;
  }
  return s;
}

std::vector<Node> singles(const std::vector<std::string>& ids) {
  std::vector<Node> n;
  for (const auto& id : ids) n.push_back({n.size(), {id}, std::nullopt});
  return n;
}

}  // namespace

TEST(Nodes, EmptySeedGivesSingletons) {
  auto ds = small_dataset();
  EXPECT_EQ(merge_labeled_nodes(ds, {}).size(), ds.size());
}

TEST(Nodes, MergesPerLabel) {
  auto ds = small_dataset();
  SeedMask m{{"a", "b", "c", "d"}, {0, 1}};
  auto nodes = merge_labeled_nodes(ds, m);
  ASSERT_EQ(nodes.size(), 8u);
  EXPECT_EQ(nodes[0].member_ids, (std::vector<std::string>{"a", "b"}));
  EXPECT_EQ(nodes[0].pinned_label, 0);
  EXPECT_EQ(nodes[1].member_ids, (std::vector<std::string>{"c", "d"}));
  for (std::size_t i = 0; i < nodes.size(); ++i) EXPECT_EQ(nodes[i].node_id, i);
}

TEST(Nodes, MultilabelSeedRejected) {
  auto ds = small_dataset();
  ds.utterances[0].labels = {0, 1};
  EXPECT_THROW(merge_labeled_nodes(ds, SeedMask{{"a"}, {0, 1}}), DataError);
}

TEST(Lexical, NoSharedKeyphraseNoEdge) {
  auto g = build_lexical_graph(singles({"u", "v"}), manual_set({{"p", 1.0, {"u"}}, {"q", 2.0, {"v"}}}));
  EXPECT_EQ(g.num_edges(), 0u);
}

TEST(Lexical, SharedScoresSum) {
  auto g = build_lexical_graph(singles({"u", "v"}), manual_set({{"p", 2.0, {"u", "v"}}, {"q", 3.5, {"u", "v"}}}));
  EXPECT_DOUBLE_EQ(g.weight(0, 1), 5.5);
  EXPECT_DOUBLE_EQ(g.weight(1, 0), 5.5);
}

TEST(Lexical, MergedNodeMatchesPairwiseExpansion) {
  // Oracle: union of member keyphrases per node, then sum of the intersection.
  std::mt19937_64 rng(11);
  const std::vector<std::string> ids = {"m1", "m2", "m3", "s1", "s2", "s3"};
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<std::tuple<std::string, double, std::vector<std::string>>> items;
    std::map<std::string, std::set<std::string>> has;
    for (int k = 0; k < 8; ++k) {
      std::vector<std::string> post;
      for (const auto& id : ids)
        if (rng() % 3 == 0) {
          post.push_back(id);
          has[id].insert("k" + std::to_string(k));
        }
      items.emplace_back("k" + std::to_string(k), 0.5 + static_cast<double>(rng() % 100) / 10.0, post);
    }
    auto kp = manual_set(items);
    std::vector<Node> nodes = {{0, {"m1", "m2", "m3"}, 0}, {1, {"s1"}, std::nullopt}, {2, {"s2"}, std::nullopt},
                               {3, {"s3"}, std::nullopt}};
    auto g = build_lexical_graph(nodes, kp);
    auto cover = [&](const Node& n) {
      std::set<std::string> s;
      for (const auto& m : n.member_ids) s.insert(has[m].begin(), has[m].end());
      return s;
    };
    for (std::size_t u = 0; u < nodes.size(); ++u)
      for (std::size_t v = 0; v < nodes.size(); ++v) {
        if (u == v) continue;
        double expected = 0;
        const auto cu = cover(nodes[u]), cv = cover(nodes[v]);
        for (const auto& [g2, score, post] : items)
          if (cu.count(g2) && cv.count(g2)) expected += score;
        EXPECT_NEAR(g.weight(u, v), expected, 1e-12);
      }
    EXPECT_TRUE(g.is_symmetric(0.0));
  }
}

TEST(Normalize, MinMaxRows) {
  WeightedGraph g(singles({"a", "b", "c", "d"}), GraphKind::lexical_W);
  g.set(0, 1, 2);
  g.set(0, 2, 4);
  g.set(0, 3, 6);
  g.set(1, 0, 7);
  g.set(2, 0, 3);
  g.set(2, 3, 3);
  auto n = row_minmax_normalize(g);
  EXPECT_DOUBLE_EQ(n.weight(0, 1), 0.0);
  EXPECT_DOUBLE_EQ(n.weight(0, 2), 0.5);
  EXPECT_DOUBLE_EQ(n.weight(0, 3), 1.0);
  EXPECT_DOUBLE_EQ(n.weight(1, 0), 1.0);
  EXPECT_DOUBLE_EQ(n.weight(2, 0), 1.0);
  EXPECT_DOUBLE_EQ(n.weight(2, 3), 1.0);
}

TEST(Normalize, PreservesRowOrder) {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> w(0.1, 9.0);
  WeightedGraph g(singles({"a", "b", "c", "d", "e", "f"}), GraphKind::lexical_W);
  for (NodeId u = 0; u < 6; ++u)
    for (NodeId v = 0; v < 6; ++v)
      if (u != v && rng() % 2) g.set(u, v, w(rng));
  auto n = row_minmax_normalize(g);
  for (NodeId u = 0; u < 6; ++u)
    for (const auto& [a, wa] : g.adj[u])
      for (const auto& [b, wb] : g.adj[u])
        if (wa < wb) {
          EXPECT_LE(n.weight(u, a), n.weight(u, b));
        }
}

TEST(Normalize, SymmetrizeAverages) {
  WeightedGraph g(singles({"a", "b"}), GraphKind::lexical_W);
  g.set(0, 1, 1.0);
  auto s = symmetrize(g);
  EXPECT_DOUBLE_EQ(s.weight(0, 1), 0.5);
  EXPECT_DOUBLE_EQ(s.weight(1, 0), 0.5);
}

TEST(Similarity, CosineValues) {
  EXPECT_NEAR(cosine({1, 0}, {1, 1}), 1.0 / std::sqrt(2.0), 1e-12);
  EXPECT_DOUBLE_EQ(similarity_weight({0.3, 0.4}, {0.3, 0.4}), 1.0);
}

TEST(Similarity, ThresholdsEdges) {
  EmbeddingTable t;
  t.dim = 2;
  t.vectors = {{"a", {1, 0}}, {"b", {0, 1}}, {"c", {1, 1}}, {"d", {1, 0}}};
  auto g = build_similarity_graph(singles({"a", "b", "c", "d"}), t);
  EXPECT_EQ(g.weight(0, 1), 0.0);
  EXPECT_NEAR(g.weight(0, 2), 1.0 / std::sqrt(2.0), 1e-12);
  EXPECT_DOUBLE_EQ(g.weight(0, 3), 1.0);
  EXPECT_TRUE(g.is_symmetric(0.0));
}

TEST(Similarity, MergedNodeUsesMeanEmbedding) {
  EmbeddingTable t;
  t.dim = 2;
  t.vectors = {{"a", {1, 0}}, {"b", {0, 1}}, {"c", {1, 1}}};
  std::vector<Node> nodes = {{0, {"a", "b"}, 0}, {1, {"c"}, std::nullopt}};
  EXPECT_NEAR(build_similarity_graph(nodes, t).weight(0, 1), 1.0, 1e-12);
}

namespace {

struct Pair {
  WeightedGraph w, a;
};

Pair random_pair(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> x(0.0, 1.0);
  auto nodes = singles({"a", "b", "c", "d", "e"});
  Pair p{WeightedGraph(nodes, GraphKind::lexical_W), WeightedGraph(nodes, GraphKind::similarity_A)};
  for (NodeId u = 0; u < 5; ++u)
    for (NodeId v = u + 1; v < 5; ++v) {
      if (rng() % 2) {
        double w = x(rng);
        p.w.set(u, v, w);
        p.w.set(v, u, w);
      }
      if (rng() % 2) {
        double w = x(rng);
        p.a.set(u, v, w);
        p.a.set(v, u, w);
      }
    }
  return p;
}

}  // namespace

TEST(Blend, Endpoints) {
  auto p = random_pair(1);
  auto g0 = blend(p.w, p.a, 0.0), g1 = blend(p.w, p.a, 1.0);
  EXPECT_EQ(g0.adj, p.w.adj);
  EXPECT_EQ(g1.adj, p.a.adj);
}

TEST(Blend, UnionSemantics) {
  auto nodes = singles({"a", "b"});
  WeightedGraph w(nodes, GraphKind::lexical_W), a(nodes, GraphKind::similarity_A);
  w.set(0, 1, 0.4);
  w.set(1, 0, 0.4);
  EXPECT_DOUBLE_EQ(blend(w, a, 0.5).weight(0, 1), 0.2);
}

TEST(Blend, MonotoneForSimilarityDominantEdges) {
  for (std::uint64_t s = 0; s < 20; ++s) {
    auto p = random_pair(s);
    for (NodeId u = 0; u < 5; ++u)
      for (NodeId v = 0; v < 5; ++v) {
        if (p.a.weight(u, v) <= p.w.weight(u, v)) continue;
        double prev = -1;
        for (int i = 0; i <= 10; ++i) {
          const double cur = blend(p.w, p.a, i / 10.0).weight(u, v);
          EXPECT_GE(cur, prev - 1e-15);
          prev = cur;
        }
      }
  }
}

TEST(Blend, NodeMismatchRejected) {
  WeightedGraph w(singles({"a"}), GraphKind::lexical_W), a(singles({"b"}), GraphKind::similarity_A);
  EXPECT_THROW(blend(w, a, 0.5), std::invalid_argument);
}

namespace {

struct Incremental {
  Dataset ds;
  EmbeddingTable emb;
  KeyphraseSet kp;
  WeightedGraph g;
};

Incremental incremental_fixture() {
  Incremental f;
  auto c = synth::make_corpus(2, 10, 8, 8.0, 3);
  f.ds = c.ds;
  f.emb = c.emb;
  f.kp = build_keyphrase_set(extract_ngrams(c.ds, c.bg), 2);
  const auto nodes = singleton_nodes(f.ds);
  f.g = blend(lexical_view(build_lexical_graph(nodes, f.kp)), build_similarity_graph(nodes, f.emb), 0.5);
  return f;
}

}  // namespace

TEST(Incremental, ZeroUtterancesUnchanged) {
  auto f = incremental_fixture();
  auto g = add_nodes_incremental(f.g, {}, f.emb, f.kp, 0.5);
  EXPECT_EQ(g.adj, f.g.adj);
  EXPECT_EQ(g.nodes, f.g.nodes);
}

TEST(Incremental, IsolatedNewNode) {
  auto f = incremental_fixture();
  std::vector<double> v(8, 0.0);
  v[7] = 1.0;  // orthogonal-ish to both centroids is not guaranteed; use a fresh axis with no keyphrases
  // Make every existing embedding have zero on axis 7 so the cosine is exactly 0.
  for (auto& [id, e] : f.emb.vectors) e[7] = 0.0;
  f.g = blend(lexical_view(build_lexical_graph(singleton_nodes(f.ds), f.kp)),
              build_similarity_graph(singleton_nodes(f.ds), f.emb), 0.5);
  f.emb.vectors["new"] = v;
  auto g = add_nodes_incremental(f.g, {{"new", "zzz qqq", {}, Split::unlabeled}}, f.emb, f.kp, 0.5);
  ASSERT_EQ(g.num_nodes(), f.g.num_nodes() + 1);
  EXPECT_TRUE(g.adj.back().empty());
}

TEST(Incremental, DuplicateGetsUnitSimilarity) {
  auto f = incremental_fixture();
  const auto& twin = f.ds.utterances[3];
  f.emb.vectors["dup"] = f.emb.at(twin.id);
  auto g = add_nodes_incremental(f.g, {{"dup", twin.text, {}, Split::unlabeled}}, f.emb, f.kp, 1.0);
  EXPECT_DOUBLE_EQ(g.weight(g.num_nodes() - 1, 3), 1.0);
}

TEST(Incremental, ExistingPairsUntouched) {
  auto f = incremental_fixture();
  auto c = synth::make_corpus(2, 4, 8, 8.0, 99);
  std::vector<Utterance> extra;
  for (auto u : c.ds.utterances) {
    u.id = "x_" + u.id;
    f.emb.vectors[u.id] = c.emb.at(u.id.substr(2));
    extra.push_back(u);
  }
  auto g = add_nodes_incremental(f.g, extra, f.emb, f.kp, 0.3);
  const auto n = f.g.num_nodes();
  for (NodeId u = 0; u < n; ++u)
    for (NodeId v = 0; v < n; ++v) EXPECT_EQ(g.weight(u, v), f.g.weight(u, v));
  EXPECT_TRUE(g.is_symmetric(0.0));
}

TEST(Incremental, IdCollisionRejected) {
  auto f = incremental_fixture();
  EXPECT_THROW(add_nodes_incremental(f.g, {f.ds.utterances[0]}, f.emb, f.kp, 0.5), DataError);
}

TEST(Connectivity, Components) {
  WeightedGraph g(singles({"a", "b", "c", "d"}), GraphKind::lexical_W);
  g.set(0, 1, 1);
  g.set(1, 0, 1);
  std::size_t n = 0;
  auto comp = connected_components(g, &n);
  EXPECT_EQ(n, 3u);
  EXPECT_EQ(comp[0], comp[1]);
  EXPECT_FALSE(is_connected(g));
}

TEST(GraphIo, RoundTrip) {
  auto p = random_pair(4);
  std::vector<Node> nodes = {{0, {"a", "z"}, 1}, {1, {"b"}, std::nullopt}, {2, {"c"}, std::nullopt},
                             {3, {"d"}, std::nullopt}, {4, {"e"}, std::nullopt}};
  std::stringstream man, edges;
  write_node_manifest(man, nodes);
  write_edges_tsv(edges, p.w);
  auto back_nodes = read_node_manifest(man);
  EXPECT_EQ(back_nodes, nodes);
  auto g = read_graph(edges, back_nodes, GraphKind::lexical_W);
  EXPECT_EQ(g.adj, p.w.adj);
}
