#pragma once

// Weighted modularity and two-phase Louvain community detection.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <random>
#include <stdexcept>
#include <utility>
#include <vector>

#include "intendd/graph.hpp"

namespace intendd {

struct Partition {
  std::vector<std::size_t> assignment;  // node -> community, contiguous ids
  std::size_t num_communities = 0;

  static Partition singletons(std::size_t n) {
    Partition p;
    p.assignment.resize(n);
    std::iota(p.assignment.begin(), p.assignment.end(), 0);
    p.num_communities = n;
    return p;
  }

  /// Renumbers communities by order of first appearance.
  static Partition from_labels(const std::vector<std::size_t>& labels) {
    Partition p;
    p.assignment.resize(labels.size());
    std::vector<std::size_t> remap;
    constexpr auto unset = static_cast<std::size_t>(-1);
    for (std::size_t i = 0; i < labels.size(); ++i) {
      if (labels[i] >= remap.size()) remap.resize(labels[i] + 1, unset);
      if (remap[labels[i]] == unset) remap[labels[i]] = p.num_communities++;
      p.assignment[i] = remap[labels[i]];
    }
    return p;
  }
};

/// Symmetric adjacency with self-loops; the working representation for Louvain.
/// Self-loop weight w_ii counts once toward strength k_i and toward total weight 2m.
struct CommunityGraph {
  static constexpr long kUnpinned = -1;

  std::vector<std::vector<std::pair<std::size_t, double>>> neighbors;  // excludes self
  std::vector<double> self_loop;
  std::vector<double> strength;
  std::vector<long> pin;  // pinned label per node, kUnpinned if none
  double total_weight = 0.0;  // 2m: sum over all matrix entries

  std::size_t size() const { return neighbors.size(); }

  void finalize() {
    strength.assign(size(), 0.0);
    total_weight = 0.0;
    for (std::size_t i = 0; i < size(); ++i) {
      double k = self_loop[i];
      for (const auto& [j, w] : neighbors[i]) k += w;
      strength[i] = k;
      total_weight += k;
    }
  }

  static CommunityGraph from(const WeightedGraph& g) {
    if (!g.is_symmetric(1e-9)) throw std::invalid_argument("Louvain requires a symmetric graph");
    CommunityGraph cg;
    cg.neighbors.resize(g.num_nodes());
    cg.self_loop.assign(g.num_nodes(), 0.0);
    cg.pin.assign(g.num_nodes(), kUnpinned);
    for (NodeId u = 0; u < g.num_nodes(); ++u) {
      if (g.nodes[u].pinned_label) cg.pin[u] = static_cast<long>(*g.nodes[u].pinned_label);
      for (const auto& [v, w] : g.adj[u])
        if (w > 0.0) cg.neighbors[u].emplace_back(v, w);
    }
    cg.finalize();
    return cg;
  }

  /// Collapses each community into a super node; intra-community weight becomes a self-loop.
  CommunityGraph aggregate(const Partition& p) const {
    CommunityGraph out;
    const std::size_t n = p.num_communities;
    out.neighbors.resize(n);
    out.self_loop.assign(n, 0.0);
    out.pin.assign(n, kUnpinned);
    std::vector<std::vector<std::size_t>> members(n);
    for (std::size_t i = 0; i < size(); ++i) {
      members[p.assignment[i]].push_back(i);
      if (out.pin[p.assignment[i]] == kUnpinned) out.pin[p.assignment[i]] = pin[i];
    }
    std::vector<double> acc(n, 0.0);
    std::vector<std::size_t> touched;
    for (std::size_t c = 0; c < n; ++c) {
      for (std::size_t i : members[c]) {
        out.self_loop[c] += self_loop[i];
        for (const auto& [j, w] : neighbors[i]) {
          const std::size_t d = p.assignment[j];
          if (d == c) {
            out.self_loop[c] += w;
            continue;
          }
          if (acc[d] == 0.0) touched.push_back(d);
          acc[d] += w;
        }
      }
      std::sort(touched.begin(), touched.end());
      for (std::size_t d : touched) {
        out.neighbors[c].emplace_back(d, acc[d]);
        acc[d] = 0.0;
      }
      touched.clear();
    }
    out.finalize();
    return out;
  }
};

/// Q = (1/2m) sum_ij [A_ij - k_i k_j / 2m] delta(c_i, c_j).
inline double modularity(const CommunityGraph& g, const std::vector<std::size_t>& assignment) {
  if (assignment.size() != g.size()) throw std::invalid_argument("partition size differs from graph size");
  if (!(g.total_weight > 0.0)) throw std::invalid_argument("modularity of a graph without edges is undefined");
  const std::size_t n_comm = assignment.empty() ? 0 : *std::max_element(assignment.begin(), assignment.end()) + 1;
  std::vector<double> in(n_comm, 0.0), tot(n_comm, 0.0);
  for (std::size_t i = 0; i < g.size(); ++i) {
    const auto c = assignment[i];
    tot[c] += g.strength[i];
    in[c] += g.self_loop[i];
    for (const auto& [j, w] : g.neighbors[i])
      if (assignment[j] == c) in[c] += w;
  }
  const double m2 = g.total_weight;
  double q = 0.0;
  for (std::size_t c = 0; c < n_comm; ++c) q += in[c] / m2 - (tot[c] / m2) * (tot[c] / m2);
  return q;
}

inline double modularity(const WeightedGraph& g, const Partition& p) {
  return modularity(CommunityGraph::from(g), p.assignment);
}

struct LouvainOptions {
  std::uint64_t rng_seed = 0;
  double min_gain = 1e-7;
  std::size_t max_passes = 1000;  // per level, guards against float ping-pong
  bool respect_pins = true;       // never join nodes pinned to different labels
};

struct LouvainResult {
  Partition partition;
  double initial_modularity = 0.0;
  double modularity = 0.0;
  std::vector<double> level_modularity;  // after each local-moving phase
};

namespace detail {

/// Local-moving phase. Returns true if any node changed community.
inline bool move_nodes(const CommunityGraph& g, std::vector<std::size_t>& comm, std::mt19937_64& rng,
                       const LouvainOptions& opt) {
  const std::size_t n = g.size();
  const double m2 = g.total_weight;
  std::vector<double> tot(n, 0.0);
  std::vector<std::size_t> count(n, 0), pinned(n, 0);
  std::vector<long> comm_pin(n, CommunityGraph::kUnpinned);
  const bool pins = opt.respect_pins && !g.pin.empty();
  for (std::size_t i = 0; i < n; ++i) {
    tot[comm[i]] += g.strength[i];
    ++count[comm[i]];
    if (pins && g.pin[i] != CommunityGraph::kUnpinned) {
      ++pinned[comm[i]];
      comm_pin[comm[i]] = g.pin[i];
    }
  }
  auto allowed = [&](std::size_t i, std::size_t c) {
    return !pins || g.pin[i] == CommunityGraph::kUnpinned || comm_pin[c] == CommunityGraph::kUnpinned ||
           comm_pin[c] == g.pin[i];
  };
  std::vector<std::size_t> empty_ids;
  for (std::size_t c = n; c-- > 0;)
    if (count[c] == 0) empty_ids.push_back(c);

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);

  std::vector<double> w_to(n, 0.0);
  std::vector<std::uint8_t> marked(n, 0);
  std::vector<std::size_t> seen;
  bool any_move = false;
  double q = modularity(g, comm);
  constexpr double eps = 1e-12;

  for (std::size_t pass = 0; pass < opt.max_passes; ++pass) {
    std::size_t moves = 0;
    for (std::size_t i : order) {
      const std::size_t own = comm[i];
      const double k = g.strength[i];
      seen.clear();
      seen.push_back(own);
      marked[own] = 1;
      for (const auto& [j, w] : g.neighbors[i]) {
        const std::size_t c = comm[j];
        if (!marked[c]) {
          marked[c] = 1;
          seen.push_back(c);
        }
        w_to[c] += w;
      }
      tot[own] -= k;
      --count[own];
      const bool is_pinned = pins && g.pin[i] != CommunityGraph::kUnpinned;
      if (is_pinned && --pinned[own] == 0) comm_pin[own] = CommunityGraph::kUnpinned;
      // Gain of inserting i into c, up to the positive factor 1/m.
      std::size_t best = own;
      double best_gain = w_to[own] - tot[own] * k / m2;
      for (std::size_t c : seen) {
        if (c == own || !allowed(i, c)) continue;
        const double gain = w_to[c] - tot[c] * k / m2;
        if (gain > best_gain + eps) {
          best_gain = gain;
          best = c;
        }
      }
      if (count[own] > 0 && 0.0 > best_gain + eps) {
        while (!empty_ids.empty() && count[empty_ids.back()] != 0) empty_ids.pop_back();
        if (!empty_ids.empty()) {
          best = empty_ids.back();
          empty_ids.pop_back();
        }
      }
      tot[best] += k;
      ++count[best];
      if (is_pinned) {
        ++pinned[best];
        comm_pin[best] = g.pin[i];
      }
      comm[i] = best;
      if (count[own] == 0) empty_ids.push_back(own);
      for (std::size_t c : seen) {
        w_to[c] = 0.0;
        marked[c] = 0;
      }
      if (best != own) ++moves;
    }
    if (moves == 0) break;
    any_move = true;
    const double q_new = modularity(g, comm);
    const double gain = q_new - q;
    q = q_new;
    if (gain < opt.min_gain) break;
  }
  return any_move;
}

}  // namespace detail

inline LouvainResult louvain_run(const WeightedGraph& graph, const std::optional<Partition>& init = std::nullopt,
                                 const LouvainOptions& opt = {}) {
  const std::size_t n = graph.num_nodes();
  LouvainResult result;
  Partition start = init ? Partition::from_labels(init->assignment) : Partition::singletons(n);
  if (start.assignment.size() != n) throw std::invalid_argument("initial partition size differs from graph size");
  CommunityGraph level = CommunityGraph::from(graph);
  if (!(level.total_weight > 0.0)) {
    result.partition = start;
    return result;
  }

  std::mt19937_64 rng(opt.rng_seed);
  std::vector<std::size_t> node_comm = start.assignment;  // original node -> current level node
  std::vector<std::size_t> comm = start.assignment;       // current level node -> community
  result.initial_modularity = modularity(level, comm);
  double q_before = result.initial_modularity;
  bool first = true;

  for (;;) {
    detail::move_nodes(level, comm, rng, opt);
    const Partition p = Partition::from_labels(comm);
    const double q_after = modularity(level, p.assignment);
    result.level_modularity.push_back(q_after);
    if (first) {
      node_comm = p.assignment;
    } else {
      for (auto& c : node_comm) c = p.assignment[c];
    }
    // A pinned start may already be coarser than singletons, so always try one aggregation.
    const bool pinned_start = first && init.has_value();
    first = false;
    if (p.num_communities == level.size()) break;
    if (!pinned_start && q_after - q_before < opt.min_gain) break;
    level = level.aggregate(p);
    comm.resize(level.size());
    std::iota(comm.begin(), comm.end(), 0);
    q_before = q_after;
  }
  result.partition = Partition::from_labels(node_comm);
  result.modularity = modularity(CommunityGraph::from(graph), result.partition.assignment);
  return result;
}

inline Partition louvain(const WeightedGraph& graph, const std::optional<Partition>& init = std::nullopt,
                         std::uint64_t rng_seed = 0) {
  LouvainOptions opt;
  opt.rng_seed = rng_seed;
  return louvain_run(graph, init, opt).partition;
}

}  // namespace intendd
