#pragma once

// Recursive feature elimination over keyphrases, maximizing Louvain modularity of
// the lexical graph while keeping it connected and the cluster count near K.

#include <algorithm>
#include <cstdint>
#include <cstdlib>
#include <optional>
#include <stdexcept>
#include <string>
#include <unordered_set>
#include <vector>

#include "intendd/graph.hpp"
#include "intendd/keyphrase.hpp"
#include "intendd/log.hpp"
#include "intendd/louvain.hpp"

namespace intendd {

struct RfeOptions {
  std::size_t max_iters = 3;  // full passes over the active set
  std::uint64_t rng_seed = 0;
};

struct RfeResult {
  KeyphraseSet selected;
  std::vector<std::string> removed;  // in removal order
  double initial_modularity = 0.0;
  double final_modularity = 0.0;
  std::size_t initial_clusters = 0;
  std::size_t final_clusters = 0;
  std::size_t passes = 0;
  bool restricted_to_component = false;
};

namespace detail {

struct RfeEval {
  bool connected = false;
  double modularity = 0.0;
  std::size_t clusters = 0;
};

inline WeightedGraph restrict_to(const WeightedGraph& g, const std::vector<NodeId>& scope,
                                 const std::vector<std::size_t>& local) {
  WeightedGraph sub(std::vector<Node>(scope.size()), g.kind);
  for (std::size_t i = 0; i < scope.size(); ++i) {
    sub.nodes[i].node_id = i;
    for (const auto& [v, w] : g.adj[scope[i]])
      if (local[v] != static_cast<std::size_t>(-1) && w > 0.0) sub.set(i, local[v], w);
  }
  return sub;
}

/// Scores the normalized lexical graph restricted to `scope`; nodes outside the
/// scope count as singleton communities. Connectivity is judged on keyphrase
/// sharing (the raw graph), since min-max normalization zeroes each row's weakest edge.
inline RfeEval evaluate_lexical(const WeightedGraph& raw, const std::vector<NodeId>& scope,
                                const std::vector<std::size_t>& local, std::uint64_t rng_seed) {
  const auto sub = restrict_to(lexical_view(raw), scope, local);
  RfeEval e;
  e.connected = is_connected(restrict_to(raw, scope, local));
  const std::size_t outside = raw.num_nodes() - scope.size();
  if (sub.num_edges() == 0) {
    e.clusters = scope.size() + outside;
    return e;
  }
  LouvainOptions opt;
  opt.rng_seed = rng_seed;
  const auto r = louvain_run(sub, std::nullopt, opt);
  e.modularity = r.modularity;
  e.clusters = r.partition.num_communities + outside;
  return e;
}

inline std::size_t cluster_gap(std::size_t clusters, int k) {
  const auto c = static_cast<long long>(clusters);
  return static_cast<std::size_t>(std::llabs(c - k));
}

}  // namespace detail

/// Greedy backward elimination. Features are visited from least promising (lowest
/// score; ties by reverse-lexicographic n-gram). A feature is dropped when the
/// graph without it stays connected and either the cluster-count gap |c - K|
/// shrinks, or modularity strictly rises without widening the gap.
inline RfeResult rfe_select_detailed(const std::vector<Node>& nodes, const KeyphraseSet& candidates, int num_intents,
                                     const RfeOptions& opt = {}) {
  if (candidates.empty()) throw std::invalid_argument("rfe_select: no candidate keyphrases");
  if (num_intents < 1) throw std::invalid_argument("rfe_select: K must be >= 1");

  const auto holders = keyphrase_nodes(nodes, candidates);
  WeightedGraph raw = build_lexical_graph(nodes, candidates);

  // Work on the largest connected component.
  std::size_t n_comp = 0;
  const auto comp = connected_components(raw, &n_comp);
  std::vector<std::size_t> comp_size(n_comp, 0);
  for (auto c : comp) ++comp_size[c];
  const std::size_t main_comp =
      n_comp == 0 ? 0 : static_cast<std::size_t>(std::max_element(comp_size.begin(), comp_size.end()) - comp_size.begin());
  std::vector<NodeId> scope;
  std::vector<std::size_t> local(nodes.size(), static_cast<std::size_t>(-1));
  for (NodeId u = 0; u < nodes.size(); ++u)
    if (comp[u] == main_comp) {
      local[u] = scope.size();
      scope.push_back(u);
    }

  RfeResult result;
  result.restricted_to_component = n_comp > 1;
  if (n_comp > 1)
    log::warn("keyphrase graph has " + std::to_string(n_comp) + " components; selecting on the largest (" +
              std::to_string(scope.size()) + " of " + std::to_string(nodes.size()) + " nodes)");

  auto state = detail::evaluate_lexical(raw, scope, local, opt.rng_seed);
  result.initial_modularity = state.modularity;
  result.initial_clusters = state.clusters;

  std::vector<std::size_t> order(candidates.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    const auto& ka = candidates.items[a];
    const auto& kb = candidates.items[b];
    if (ka.score != kb.score) return ka.score < kb.score;
    return ka.ngram > kb.ngram;
  });

  std::vector<bool> active(candidates.size(), true);
  std::size_t n_active = candidates.size();
  for (std::size_t pass = 0; pass < opt.max_iters; ++pass) {
    ++result.passes;
    bool removed_any = false;
    for (std::size_t k : order) {
      if (!active[k] || n_active <= 1) continue;
      const double score = candidates.items[k].score;
      WeightedGraph trial = raw;
      accumulate_keyphrase(trial, holders[k], -score);
      prune_edges(trial, 1e-9 * std::max(1.0, std::abs(score)));
      const auto next = detail::evaluate_lexical(trial, scope, local, opt.rng_seed);
      if (!next.connected) continue;
      const auto gap_now = detail::cluster_gap(state.clusters, num_intents);
      const auto gap_next = detail::cluster_gap(next.clusters, num_intents);
      const bool drop = gap_next < gap_now || (next.modularity > state.modularity && gap_next <= gap_now);
      if (!drop) continue;
      active[k] = false;
      --n_active;
      raw = std::move(trial);
      state = next;
      removed_any = true;
      result.removed.push_back(candidates.items[k].ngram);
    }
    if (!removed_any) break;
  }

  std::unordered_set<std::string> keep;
  for (std::size_t k = 0; k < candidates.size(); ++k)
    if (active[k]) keep.insert(candidates.items[k].ngram);
  result.selected = candidates.subset(keep);
  result.final_modularity = state.modularity;
  result.final_clusters = state.clusters;
  return result;
}

inline KeyphraseSet rfe_select(const std::vector<Node>& nodes, const KeyphraseSet& candidates, int num_intents,
                               const RfeOptions& opt = {}) {
  return rfe_select_detailed(nodes, candidates, num_intents, opt).selected;
}

}  // namespace intendd
