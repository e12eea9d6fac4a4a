#pragma once

// Grid search over the lexical/similarity blend weight, scored by silhouette.

#include <algorithm>
#include <cstdint>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <vector>

#include "intendd/graph.hpp"
#include "intendd/log.hpp"
#include "intendd/louvain.hpp"
#include "intendd/metrics.hpp"

namespace intendd {

inline constexpr double kDefaultAlpha = 0.5;

inline std::vector<double> default_alpha_grid() {
  std::vector<double> grid;
  for (int i = 0; i <= 10; ++i) grid.push_back(i / 10.0);
  return grid;
}

struct AlphaCandidate {
  double alpha = 0.0;
  std::optional<double> silhouette;
  std::size_t num_clusters = 0;
};

struct AlphaSearch {
  double alpha = kDefaultAlpha;
  std::vector<AlphaCandidate> candidates;  // ascending alpha
  bool fallback = false;
};

/// For each alpha: blend, run Louvain, and score the partition with the silhouette
/// under d = 1 - blended similarity. Highest silhouette wins; ties go to the
/// smaller alpha. If no candidate yields a defined silhouette the default 0.5 is used.
inline AlphaSearch tune_alpha_detailed(const WeightedGraph& w_graph, const WeightedGraph& a_graph,
                                       std::vector<double> grid, std::uint64_t rng_seed = 0) {
  if (grid.empty()) throw std::invalid_argument("alpha grid is empty");
  std::sort(grid.begin(), grid.end());
  grid.erase(std::unique(grid.begin(), grid.end()), grid.end());
  AlphaSearch out;
  std::optional<double> best;
  for (double alpha : grid) {
    const auto g = blend(w_graph, a_graph, alpha);
    const auto p = louvain(g, std::nullopt, rng_seed);
    AlphaCandidate cand{alpha, similarity_silhouette(p.assignment, g), p.num_communities};
    if (cand.silhouette && (!best || *cand.silhouette > *best)) {
      best = cand.silhouette;
      out.alpha = alpha;
    }
    out.candidates.push_back(cand);
  }
  if (!best) {
    out.alpha = kDefaultAlpha;
    out.fallback = true;
    log::warn("silhouette undefined for every alpha candidate; using alpha = 0.5");
  }
  return out;
}

inline double tune_alpha(const WeightedGraph& w_graph, const WeightedGraph& a_graph, const std::vector<double>& grid,
                         std::uint64_t rng_seed = 0) {
  return tune_alpha_detailed(w_graph, a_graph, grid, rng_seed).alpha;
}

}  // namespace intendd
