#pragma once

// Transductive graphs over utterance nodes: lexical (W), embedding similarity (A)
// and their blend (G_pred).

#include <algorithm>
#include <charconv>
#include <cmath>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <queue>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include <json.hpp>

#include "intendd/corpus.hpp"
#include "intendd/error.hpp"
#include "intendd/keyphrase.hpp"

namespace intendd {

using NodeId = std::size_t;

struct Node {
  NodeId node_id = 0;
  std::vector<std::string> member_ids;
  std::optional<LabelId> pinned_label;

  bool merged() const { return member_ids.size() > 1; }
  bool operator==(const Node&) const = default;
};

enum class GraphKind { lexical_W, similarity_A, blended_G_pred };

/// Sparse row-oriented weighted graph. Self-edges are never stored.
struct WeightedGraph {
  std::vector<Node> nodes;
  std::vector<std::map<NodeId, double>> adj;
  GraphKind kind = GraphKind::lexical_W;

  WeightedGraph() = default;
  WeightedGraph(std::vector<Node> n, GraphKind k) : nodes(std::move(n)), adj(nodes.size()), kind(k) {}

  std::size_t num_nodes() const { return nodes.size(); }

  std::size_t num_edges() const {
    std::size_t e = 0;
    for (const auto& row : adj) e += row.size();
    return e;
  }

  double weight(NodeId u, NodeId v) const {
    auto it = adj[u].find(v);
    return it == adj[u].end() ? 0.0 : it->second;
  }

  void set(NodeId u, NodeId v, double w) {
    if (u == v) return;
    if (!(w >= 0.0) || !std::isfinite(w)) throw std::invalid_argument("edge weight must be finite and >= 0");
    adj[u][v] = w;
  }

  void add(NodeId u, NodeId v, double w) {
    if (u == v) return;
    adj[u][v] += w;
  }

  bool is_symmetric(double tol = 1e-12) const {
    for (NodeId u = 0; u < adj.size(); ++u)
      for (const auto& [v, w] : adj[u])
        if (std::abs(weight(v, u) - w) > tol) return false;
    return true;
  }

  bool same_nodes(const WeightedGraph& other) const { return nodes == other.nodes; }
};

// ---------------------------------------------------------------------------
// Nodes

inline std::vector<Node> singleton_nodes(const Dataset& ds) {
  std::vector<Node> nodes;
  nodes.reserve(ds.size());
  for (const auto& u : ds.utterances) nodes.push_back({nodes.size(), {u.id}, std::nullopt});
  return nodes;
}

/// One node per known label with labeled utterances (in label order), then a
/// singleton per remaining utterance in dataset order.
inline std::vector<Node> merge_labeled_nodes(const Dataset& ds, const SeedMask& seed) {
  const auto index = ds.index();
  std::map<LabelId, std::vector<std::string>> groups;
  for (const auto& id : seed.labeled_ids) {
    auto it = index.find(id);
    if (it == index.end()) throw DataError("seed id '" + id + "' not in dataset");
    const auto& u = ds.utterances[it->second];
    if (u.labels.empty()) throw DataError("labeled utterance '" + id + "' has no label");
    if (u.labels.size() > 1) throw DataError("labeled utterance '" + id + "' is multilabel; cannot merge");
    groups[u.labels.front()];
  }
  // Members listed in dataset order so merged nodes are independent of set iteration.
  for (const auto& u : ds.utterances)
    if (seed.labeled_ids.count(u.id)) groups[u.labels.front()].push_back(u.id);

  std::vector<Node> nodes;
  for (auto& [label, members] : groups) nodes.push_back({nodes.size(), std::move(members), label});
  for (const auto& u : ds.utterances)
    if (!seed.labeled_ids.count(u.id)) nodes.push_back({nodes.size(), {u.id}, std::nullopt});
  return nodes;
}

inline std::unordered_map<std::string, NodeId> member_index(const std::vector<Node>& nodes) {
  std::unordered_map<std::string, NodeId> out;
  for (const auto& n : nodes)
    for (const auto& m : n.member_ids) out.emplace(m, n.node_id);
  return out;
}

// ---------------------------------------------------------------------------
// Lexical graph W

/// For each keyphrase (in set order), the sorted distinct nodes with a member containing it.
inline std::vector<std::vector<NodeId>> keyphrase_nodes(const std::vector<Node>& nodes, const KeyphraseSet& kp) {
  const auto where = member_index(nodes);
  std::vector<std::vector<NodeId>> out;
  out.reserve(kp.size());
  for (const auto& k : kp.items) {
    std::vector<NodeId> ns;
    for (const auto& id : kp.postings(k.ngram)) {
      auto it = where.find(id);
      if (it != where.end()) ns.push_back(it->second);
    }
    std::sort(ns.begin(), ns.end());
    ns.erase(std::unique(ns.begin(), ns.end()), ns.end());
    out.push_back(std::move(ns));
  }
  return out;
}

/// Adds score to every node pair sharing the keyphrase; a negative score retracts it.
inline void accumulate_keyphrase(WeightedGraph& g, const std::vector<NodeId>& holders, double score) {
  for (std::size_t i = 0; i < holders.size(); ++i)
    for (std::size_t j = i + 1; j < holders.size(); ++j) {
      g.add(holders[i], holders[j], score);
      g.add(holders[j], holders[i], score);
    }
}

/// Drops entries whose magnitude fell below eps after subtraction.
inline void prune_edges(WeightedGraph& g, double eps = 1e-12) {
  for (auto& row : g.adj)
    for (auto it = row.begin(); it != row.end();) {
      if (it->second <= eps) it = row.erase(it);
      else ++it;
    }
}

inline WeightedGraph build_lexical_graph(const std::vector<Node>& nodes, const KeyphraseSet& kp) {
  WeightedGraph g(nodes, GraphKind::lexical_W);
  const auto holders = keyphrase_nodes(nodes, kp);
  for (std::size_t k = 0; k < kp.size(); ++k) accumulate_keyphrase(g, holders[k], kp.items[k].score);
  return g;
}

/// Per row: (w - min) / (max - min). Rows with a single edge or all-equal weights map to 1.
inline WeightedGraph row_minmax_normalize(const WeightedGraph& g) {
  WeightedGraph out = g;
  for (auto& row : out.adj) {
    if (row.empty()) continue;
    double lo = row.begin()->second, hi = lo;
    for (const auto& [v, w] : row) {
      lo = std::min(lo, w);
      hi = std::max(hi, w);
    }
    const double span = hi - lo;
    for (auto& [v, w] : row) w = span > 0.0 ? (w - lo) / span : 1.0;
  }
  return out;
}

/// (G + G^T) / 2; zero-weight entries are dropped.
inline WeightedGraph symmetrize(const WeightedGraph& g) {
  WeightedGraph out(g.nodes, g.kind);
  for (NodeId u = 0; u < g.num_nodes(); ++u)
    for (const auto& [v, w] : g.adj[u]) {
      out.add(u, v, 0.5 * w);
      out.add(v, u, 0.5 * w);
    }
  prune_edges(out, 0.0);
  return out;
}

/// Normalized and symmetrized lexical graph, the form consumed by Louvain and MAD.
inline WeightedGraph lexical_view(const WeightedGraph& raw) {
  return symmetrize(row_minmax_normalize(raw));
}

// ---------------------------------------------------------------------------
// Similarity graph A

inline std::vector<double> node_embedding(const Node& n, const EmbeddingTable& table) {
  std::vector<double> mean(table.dim, 0.0);
  for (const auto& id : n.member_ids) {
    const auto& v = table.at(id);
    for (std::size_t d = 0; d < table.dim; ++d) mean[d] += v[d];
  }
  for (double& x : mean) x /= static_cast<double>(n.member_ids.size());
  return mean;
}

inline double cosine(const std::vector<double>& a, const std::vector<double>& b) {
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  if (na == 0.0 || nb == 0.0) return 0.0;
  return dot / (std::sqrt(na) * std::sqrt(nb));
}

inline constexpr double kDefaultSimilarityThreshold = 0.05;

/// Clipped cosine similarity; clipping at 1 absorbs rounding on identical vectors.
inline double similarity_weight(const std::vector<double>& a, const std::vector<double>& b) {
  return std::clamp(cosine(a, b), 0.0, 1.0);
}

inline WeightedGraph build_similarity_graph(const std::vector<Node>& nodes, const EmbeddingTable& table,
                                            double threshold = kDefaultSimilarityThreshold) {
  WeightedGraph g(nodes, GraphKind::similarity_A);
  std::vector<std::vector<double>> emb;
  emb.reserve(nodes.size());
  for (const auto& n : nodes) emb.push_back(node_embedding(n, table));
  for (NodeId u = 0; u < nodes.size(); ++u)
    for (NodeId v = u + 1; v < nodes.size(); ++v) {
      const double w = similarity_weight(emb[u], emb[v]);
      if (w <= 0.0 || w < threshold) continue;
      g.set(u, v, w);
      g.set(v, u, w);
    }
  return g;
}

// ---------------------------------------------------------------------------
// Blending

inline WeightedGraph blend(const WeightedGraph& w, const WeightedGraph& a, double alpha) {
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw std::invalid_argument("alpha must lie in [0,1]");
  if (!w.same_nodes(a)) throw std::invalid_argument("blend: node sets differ");
  WeightedGraph out(w.nodes, GraphKind::blended_G_pred);
  for (NodeId u = 0; u < w.num_nodes(); ++u) {
    for (const auto& [v, x] : w.adj[u]) out.add(u, v, (1.0 - alpha) * x);
    for (const auto& [v, x] : a.adj[u]) out.add(u, v, alpha * x);
  }
  if (alpha == 0.0 || alpha == 1.0) prune_edges(out, 0.0);
  return out;
}

// ---------------------------------------------------------------------------
// Incremental addition of utterances to a blended graph.

/// Adds one singleton node per new utterance. Lexical edges use the frozen keyphrase
/// set, min-max normalized over the new node's own row; similarity edges use the
/// thresholded cosine. Weights between pre-existing nodes are left untouched.
inline WeightedGraph add_nodes_incremental(const WeightedGraph& g_pred, const std::vector<Utterance>& new_utterances,
                                           const EmbeddingTable& table, const KeyphraseSet& kp, double alpha,
                                           double threshold = kDefaultSimilarityThreshold) {
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw std::invalid_argument("alpha must lie in [0,1]");
  WeightedGraph out = g_pred;
  if (new_utterances.empty()) return out;

  auto where = member_index(g_pred.nodes);
  const std::size_t old_n = g_pred.num_nodes();
  for (const auto& u : new_utterances) {
    if (!where.emplace(u.id, out.nodes.size()).second) throw DataError("id collision: '" + u.id + "'");
    table.at(u.id);
    out.nodes.push_back({out.nodes.size(), {u.id}, std::nullopt});
    out.adj.emplace_back();
  }
  const std::size_t total = out.num_nodes();

  // Keyphrase -> index, and each node's keyphrase set.
  std::unordered_map<std::string, std::size_t> kp_pos;
  for (std::size_t k = 0; k < kp.size(); ++k) kp_pos.emplace(kp.items[k].ngram, k);
  std::vector<std::vector<std::size_t>> node_kps(total);
  const auto holders = keyphrase_nodes(g_pred.nodes, kp);
  for (std::size_t k = 0; k < holders.size(); ++k)
    for (NodeId n : holders[k]) node_kps[n].push_back(k);
  const int n_max = kp.max_order();
  for (std::size_t i = 0; i < new_utterances.size(); ++i) {
    for (const auto& gram : distinct_ngrams(new_utterances[i].text, n_max)) {
      auto it = kp_pos.find(gram);
      if (it != kp_pos.end()) node_kps[old_n + i].push_back(it->second);
    }
    std::sort(node_kps[old_n + i].begin(), node_kps[old_n + i].end());
  }
  for (auto& v : node_kps) std::sort(v.begin(), v.end());

  std::vector<std::vector<double>> emb(total);
  for (NodeId n = 0; n < total; ++n) emb[n] = node_embedding(out.nodes[n], table);

  // Normalized lexical row of every new node.
  std::vector<std::map<NodeId, double>> lex(total - old_n);
  for (NodeId nu = old_n; nu < total; ++nu) {
    auto& row = lex[nu - old_n];
    const auto& ka = node_kps[nu];
    for (NodeId v = 0; v < total; ++v) {
      if (v == nu) continue;
      const auto& kb = node_kps[v];
      double shared = 0.0;
      for (std::size_t a = 0, b = 0; a < ka.size() && b < kb.size();) {
        if (ka[a] < kb[b]) ++a;
        else if (kb[b] < ka[a]) ++b;
        else {
          shared += kp.items[ka[a]].score;
          ++a;
          ++b;
        }
      }
      if (shared > 0.0) row.emplace(v, shared);
    }
    if (row.empty()) continue;
    double lo = row.begin()->second, hi = lo;
    for (const auto& [v, w] : row) {
      lo = std::min(lo, w);
      hi = std::max(hi, w);
    }
    for (auto& [v, w] : row) w = hi > lo ? (w - lo) / (hi - lo) : 1.0;
  }
  auto lex_weight = [&](NodeId from, NodeId to) {
    const auto& row = lex[from - old_n];
    auto it = row.find(to);
    return it == row.end() ? 0.0 : it->second;
  };

  for (NodeId nu = old_n; nu < total; ++nu) {
    for (NodeId v = 0; v < nu; ++v) {
      double sim = similarity_weight(emb[nu], emb[v]);
      if (sim < threshold) sim = 0.0;
      const double w_lex = v < old_n ? lex_weight(nu, v) : 0.5 * (lex_weight(nu, v) + lex_weight(v, nu));
      const double w = alpha * sim + (1.0 - alpha) * w_lex;
      if (w <= 0.0) continue;
      out.set(nu, v, w);
      out.set(v, nu, w);
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Connectivity

/// Component id per node; components numbered by their smallest node.
inline std::vector<std::size_t> connected_components(const WeightedGraph& g, std::size_t* count = nullptr) {
  constexpr auto unset = static_cast<std::size_t>(-1);
  std::vector<std::size_t> comp(g.num_nodes(), unset);
  std::size_t next = 0;
  for (NodeId s = 0; s < g.num_nodes(); ++s) {
    if (comp[s] != unset) continue;
    std::queue<NodeId> q;
    q.push(s);
    comp[s] = next;
    while (!q.empty()) {
      NodeId u = q.front();
      q.pop();
      for (const auto& [v, w] : g.adj[u])
        if (comp[v] == unset) {
          comp[v] = next;
          q.push(v);
        }
    }
    ++next;
  }
  if (count) *count = next;
  return comp;
}

inline bool is_connected(const WeightedGraph& g) {
  std::size_t n = 0;
  connected_components(g, &n);
  return n <= 1;
}

// ---------------------------------------------------------------------------
// Dump / load: TSV edge list plus node manifest JSONL.

inline void write_edges_tsv(std::ostream& out, const WeightedGraph& g) {
  char buf[64];
  for (NodeId u = 0; u < g.num_nodes(); ++u)
    for (const auto& [v, w] : g.adj[u]) {
      auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, w);
      out << u << '\t' << v << '\t' << std::string_view(buf, static_cast<std::size_t>(ptr - buf)) << '\n';
    }
}

inline void write_node_manifest(std::ostream& out, const std::vector<Node>& nodes) {
  for (const auto& n : nodes) {
    nlohmann::json rec = {{"node_id", n.node_id}, {"member_ids", n.member_ids}};
    rec["pinned_label"] = n.pinned_label ? nlohmann::json(*n.pinned_label) : nlohmann::json(nullptr);
    out << rec.dump() << '\n';
  }
}

inline std::vector<Node> read_node_manifest(std::istream& in) {
  std::vector<Node> nodes;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      auto rec = nlohmann::json::parse(line);
      Node n;
      n.node_id = rec.at("node_id").get<NodeId>();
      n.member_ids = rec.at("member_ids").get<std::vector<std::string>>();
      if (!rec.at("pinned_label").is_null()) n.pinned_label = rec.at("pinned_label").get<LabelId>();
      if (n.node_id != nodes.size()) throw DataError("node ids must be contiguous");
      nodes.push_back(std::move(n));
    } catch (const nlohmann::json::exception& e) {
      throw DataError("node manifest line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return nodes;
}

inline WeightedGraph read_graph(std::istream& edges, std::vector<Node> nodes, GraphKind kind) {
  WeightedGraph g(std::move(nodes), kind);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(edges, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::size_t u = 0, v = 0;
    double w = 0.0;
    const char* p = line.data();
    const char* end = line.data() + line.size();
    auto r1 = std::from_chars(p, end, u);
    bool ok = r1.ec == std::errc{} && r1.ptr != end && *r1.ptr == '\t';
    if (ok) {
      auto r2 = std::from_chars(r1.ptr + 1, end, v);
      ok = r2.ec == std::errc{} && r2.ptr != end && *r2.ptr == '\t';
      if (ok) {
        auto r3 = std::from_chars(r2.ptr + 1, end, w);
        ok = r3.ec == std::errc{} && r3.ptr == end;
      }
    }
    if (!ok || u >= g.num_nodes() || v >= g.num_nodes())
      throw DataError("edge list line " + std::to_string(line_no) + ": malformed");
    g.set(u, v, w);
  }
  return g;
}

}  // namespace intendd
