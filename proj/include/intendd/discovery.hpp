#pragma once

// Unsupervised and semi-supervised intent discovery over the blended graph.

#include <algorithm>
#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "intendd/alpha_search.hpp"
#include "intendd/corpus.hpp"
#include "intendd/graph.hpp"
#include "intendd/keyphrase.hpp"
#include "intendd/log.hpp"
#include "intendd/louvain.hpp"
#include "intendd/metrics.hpp"

namespace intendd {

struct DiscoveryConfig {
  double similarity_threshold = kDefaultSimilarityThreshold;
  std::optional<double> alpha;  // fixed blend weight; tuned on the grid when unset
  std::vector<double> alpha_grid = default_alpha_grid();
  std::uint64_t rng_seed = 0;
};

struct DiscoveryResult {
  std::vector<std::string> ids;        // utterance ids, graph node order expanded
  std::vector<std::size_t> clusters;   // cluster per entry of ids
  double alpha_used = kDefaultAlpha;
  std::size_t num_clusters = 0;
  std::optional<double> quality;       // silhouette; nullopt if undefined
  WeightedGraph g_pred;
  Partition node_partition;

  std::unordered_map<std::string, std::size_t> assignment() const {
    std::unordered_map<std::string, std::size_t> out;
    for (std::size_t i = 0; i < ids.size(); ++i) out.emplace(ids[i], clusters[i]);
    return out;
  }

  /// Cluster per utterance in dataset order.
  std::vector<std::size_t> clusters_for(const Dataset& ds) const {
    const auto a = assignment();
    std::vector<std::size_t> out;
    out.reserve(ds.size());
    for (const auto& u : ds.utterances) out.push_back(a.at(u.id));
    return out;
  }
};

namespace detail {

inline void expand_partition(DiscoveryResult& r, const std::vector<std::size_t>& node_cluster) {
  r.ids.clear();
  r.clusters.clear();
  std::vector<std::size_t> distinct;
  for (const auto& n : r.g_pred.nodes)
    for (const auto& id : n.member_ids) {
      r.ids.push_back(id);
      r.clusters.push_back(node_cluster[n.node_id]);
    }
  distinct = r.clusters;
  std::sort(distinct.begin(), distinct.end());
  r.num_clusters = static_cast<std::size_t>(std::unique(distinct.begin(), distinct.end()) - distinct.begin());
}

}  // namespace detail

inline DiscoveryResult discover(const Dataset& ds, const EmbeddingTable& embeddings, const KeyphraseSet& keyphrases,
                                const SeedMask& seed, const DiscoveryConfig& cfg = {}) {
  if (ds.size() == 0) throw DataError("cannot discover intents in an empty dataset");
  std::vector<Node> nodes;
  bool multilabel_seed = false;
  const auto index = ds.index();
  for (const auto& id : seed.labeled_ids) {
    auto it = index.find(id);
    if (it != index.end() && ds.utterances[it->second].labels.size() > 1) multilabel_seed = true;
  }
  if (multilabel_seed) {
    log::warn("multilabel seed utterances cannot be merged; using singleton nodes");
    nodes = singleton_nodes(ds);
  } else {
    nodes = merge_labeled_nodes(ds, seed);
  }

  const auto w = lexical_view(build_lexical_graph(nodes, keyphrases));
  const auto a = build_similarity_graph(nodes, embeddings, cfg.similarity_threshold);

  DiscoveryResult r;
  r.alpha_used = cfg.alpha ? *cfg.alpha : tune_alpha(w, a, cfg.alpha_grid, cfg.rng_seed);
  r.g_pred = blend(w, a, r.alpha_used);
  r.node_partition = louvain(r.g_pred, std::nullopt, cfg.rng_seed);
  r.quality = similarity_silhouette(r.node_partition.assignment, r.g_pred);
  detail::expand_partition(r, r.node_partition.assignment);

  if (ds.num_intents > 0 && r.num_clusters != static_cast<std::size_t>(ds.num_intents))
    log::info("discovered " + std::to_string(r.num_clusters) + " clusters for K = " + std::to_string(ds.num_intents));
  return r;
}

/// Adds new utterances to G_pred and reruns Louvain from the existing partition,
/// new nodes starting as singletons. Surviving clusters keep their ids.
inline DiscoveryResult assign_new(const DiscoveryResult& prev, const std::vector<Utterance>& new_utterances,
                                  const EmbeddingTable& embeddings, const KeyphraseSet& keyphrases,
                                  const DiscoveryConfig& cfg = {}) {
  if (new_utterances.empty()) return prev;
  DiscoveryResult r;
  r.alpha_used = prev.alpha_used;
  r.g_pred = add_nodes_incremental(prev.g_pred, new_utterances, embeddings, keyphrases, prev.alpha_used,
                                   cfg.similarity_threshold);
  const std::size_t old_n = prev.g_pred.num_nodes();
  const std::size_t old_k = prev.node_partition.num_communities;

  // Node-level cluster ids of the previous result, keyed through the first member.
  const auto prev_assign = prev.assignment();
  std::vector<std::size_t> init(r.g_pred.num_nodes());
  for (std::size_t i = 0; i < old_n; ++i) init[i] = prev_assign.at(prev.g_pred.nodes[i].member_ids.front());
  std::size_t next_id = 0;
  for (std::size_t i = 0; i < old_n; ++i) next_id = std::max(next_id, init[i] + 1);
  next_id = std::max(next_id, old_k);
  for (std::size_t i = old_n; i < init.size(); ++i) init[i] = next_id++;

  Partition start;
  start.assignment = init;
  start.num_communities = next_id;
  LouvainOptions opt;
  opt.rng_seed = cfg.rng_seed;
  const auto run = louvain_run(r.g_pred, start, opt);

  // Map each final community to the previous id it overlaps most, if still free.
  const auto& fin = run.partition;
  std::vector<std::map<std::size_t, std::size_t>> overlap(fin.num_communities);
  for (std::size_t i = 0; i < old_n; ++i) ++overlap[fin.assignment[i]][init[i]];
  std::vector<std::size_t> label(fin.num_communities, static_cast<std::size_t>(-1));
  std::vector<bool> taken(next_id + fin.num_communities, false);
  for (std::size_t c = 0; c < fin.num_communities; ++c) {
    std::size_t best = static_cast<std::size_t>(-1), best_count = 0;
    for (const auto& [old_id, count] : overlap[c])
      if (count > best_count && !taken[old_id]) {
        best = old_id;
        best_count = count;
      }
    if (best != static_cast<std::size_t>(-1)) {
      label[c] = best;
      taken[best] = true;
    }
  }
  std::size_t fresh = 0;
  for (std::size_t i = 0; i < old_n; ++i) fresh = std::max(fresh, init[i] + 1);
  for (std::size_t c = 0; c < fin.num_communities; ++c)
    if (label[c] == static_cast<std::size_t>(-1)) label[c] = fresh++;

  std::vector<std::size_t> node_cluster(fin.assignment.size());
  for (std::size_t i = 0; i < node_cluster.size(); ++i) node_cluster[i] = label[fin.assignment[i]];
  r.node_partition = fin;
  r.quality = similarity_silhouette(fin.assignment, r.g_pred);
  detail::expand_partition(r, node_cluster);
  return r;
}

}  // namespace intendd
