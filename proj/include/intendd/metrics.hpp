#pragma once

// Clustering (ACC / NMI / ARI / silhouette) and classification (accuracy / F1 /
// exact match) evaluation.

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <vector>

#include "intendd/corpus.hpp"
#include "intendd/graph.hpp"

namespace intendd {

namespace detail {

/// Maps arbitrary labels to 0..k-1 by sorted label value.
template <class L>
std::vector<std::size_t> compact_labels(const std::vector<L>& labels, std::size_t* k) {
  std::map<L, std::size_t> ids;
  for (const auto& l : labels) ids.emplace(l, 0);
  std::size_t next = 0;
  for (auto& [l, id] : ids) id = next++;
  std::vector<std::size_t> out;
  out.reserve(labels.size());
  for (const auto& l : labels) out.push_back(ids.at(l));
  *k = next;
  return out;
}

struct Contingency {
  std::vector<std::vector<double>> table;  // [pred][gold]
  std::vector<double> pred_sums, gold_sums;
  double n = 0.0;
};

template <class A, class B>
Contingency contingency(const std::vector<A>& pred, const std::vector<B>& gold) {
  if (pred.size() != gold.size()) throw std::invalid_argument("partitions cover different item counts");
  std::size_t kp = 0, kg = 0;
  const auto p = compact_labels(pred, &kp);
  const auto g = compact_labels(gold, &kg);
  Contingency c;
  c.table.assign(kp, std::vector<double>(kg, 0.0));
  c.pred_sums.assign(kp, 0.0);
  c.gold_sums.assign(kg, 0.0);
  for (std::size_t i = 0; i < p.size(); ++i) {
    c.table[p[i]][g[i]] += 1.0;
    c.pred_sums[p[i]] += 1.0;
    c.gold_sums[g[i]] += 1.0;
  }
  c.n = static_cast<double>(p.size());
  return c;
}

inline double choose2(double x) { return x * (x - 1.0) / 2.0; }

}  // namespace detail

/// Maximum-weight assignment of rows to columns (Hungarian method, O(n^3)).
/// Rectangular inputs are padded with zeros. Returns row -> column.
inline std::vector<std::size_t> max_weight_assignment(const std::vector<std::vector<double>>& weight) {
  const std::size_t rows = weight.size();
  const std::size_t cols = rows == 0 ? 0 : weight.front().size();
  const std::size_t n = std::max(rows, cols);
  if (n == 0) return {};
  double hi = 0.0;
  for (const auto& r : weight)
    for (double w : r) hi = std::max(hi, w);
  auto cost = [&](std::size_t i, std::size_t j) {
    const double w = (i < rows && j < cols) ? weight[i][j] : 0.0;
    return hi - w;
  };
  // 1-indexed potentials formulation.
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
  std::vector<std::size_t> p(n + 1, 0), way(n + 1, 0);
  for (std::size_t i = 1; i <= n; ++i) {
    p[0] = i;
    std::size_t j0 = 0;
    std::vector<double> minv(n + 1, inf);
    std::vector<bool> used(n + 1, false);
    do {
      used[j0] = true;
      const std::size_t i0 = p[j0];
      double delta = inf;
      std::size_t j1 = 0;
      for (std::size_t j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (std::size_t j = 0; j <= n; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const std::size_t j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0 != 0);
  }
  std::vector<std::size_t> row_to_col(n, 0);
  for (std::size_t j = 1; j <= n; ++j) row_to_col[p[j] - 1] = j - 1;
  row_to_col.resize(rows);
  return row_to_col;
}

/// Fraction of items matched under the best one-to-one cluster -> class mapping.
template <class A, class B>
double clustering_accuracy(const std::vector<A>& pred, const std::vector<B>& gold) {
  if (pred.empty()) throw std::invalid_argument("clustering_accuracy: empty input");
  const auto c = detail::contingency(pred, gold);
  const auto match = max_weight_assignment(c.table);
  double hit = 0.0;
  for (std::size_t r = 0; r < match.size(); ++r)
    if (match[r] < c.gold_sums.size()) hit += c.table[r][match[r]];
  return hit / c.n;
}

/// I(pred; gold) / sqrt(H(pred) H(gold)), natural logs; 0 when either entropy is 0.
template <class A, class B>
double nmi(const std::vector<A>& pred, const std::vector<B>& gold) {
  if (pred.empty()) return 0.0;
  const auto c = detail::contingency(pred, gold);
  auto entropy = [&](const std::vector<double>& sums) {
    double h = 0.0;
    for (double s : sums)
      if (s > 0) h -= (s / c.n) * std::log(s / c.n);
    return h;
  };
  const double hp = entropy(c.pred_sums), hg = entropy(c.gold_sums);
  if (hp <= 0.0 || hg <= 0.0) return 0.0;
  double mi = 0.0;
  for (std::size_t i = 0; i < c.table.size(); ++i)
    for (std::size_t j = 0; j < c.gold_sums.size(); ++j) {
      const double nij = c.table[i][j];
      if (nij > 0) mi += (nij / c.n) * std::log(c.n * nij / (c.pred_sums[i] * c.gold_sums[j]));
    }
  return std::clamp(mi / std::sqrt(hp * hg), 0.0, 1.0);
}

/// Adjusted Rand index from pair counts; a degenerate denominator yields 1 for
/// identical partitions and 0 otherwise.
template <class A, class B>
double ari(const std::vector<A>& pred, const std::vector<B>& gold) {
  if (pred.empty()) return 1.0;
  const auto c = detail::contingency(pred, gold);
  double sum_ij = 0.0, sum_a = 0.0, sum_b = 0.0;
  for (const auto& row : c.table)
    for (double nij : row) sum_ij += detail::choose2(nij);
  for (double a : c.pred_sums) sum_a += detail::choose2(a);
  for (double b : c.gold_sums) sum_b += detail::choose2(b);
  const double total = detail::choose2(c.n);
  const double expected = total > 0 ? sum_a * sum_b / total : 0.0;
  const double max_index = 0.5 * (sum_a + sum_b);
  const double denom = max_index - expected;
  if (denom == 0.0) {
    // Partitions agree iff every nonzero row and column of the table has one nonzero cell.
    std::size_t nonzero = 0;
    for (const auto& row : c.table)
      for (double nij : row) nonzero += nij > 0;
    const bool identical = nonzero == c.pred_sums.size() && nonzero == c.gold_sums.size();
    return identical ? 1.0 : 0.0;
  }
  return (sum_ij - expected) / denom;
}

struct ClusteringScore {
  double acc = 0.0;
  double nmi = 0.0;
  double ari = 0.0;
};

template <class A, class B>
ClusteringScore clustering_scores(const std::vector<A>& pred, const std::vector<B>& gold) {
  return {clustering_accuracy(pred, gold), nmi(pred, gold), ari(pred, gold)};
}

/// Mean silhouette over items for a dense dissimilarity matrix. Items in
/// singleton clusters contribute 0. nullopt when fewer than two clusters exist.
template <class L>
std::optional<double> silhouette(const std::vector<L>& labels, const std::vector<std::vector<double>>& dissim) {
  const std::size_t n = labels.size();
  if (dissim.size() != n) throw std::invalid_argument("silhouette: matrix size differs from label count");
  std::size_t k = 0;
  const auto lab = detail::compact_labels(labels, &k);
  if (k < 2) return std::nullopt;
  std::vector<double> size(k, 0.0);
  for (auto l : lab) size[l] += 1.0;
  double total = 0.0;
  std::vector<double> sum(k);
  for (std::size_t i = 0; i < n; ++i) {
    if (size[lab[i]] <= 1.0) continue;
    std::fill(sum.begin(), sum.end(), 0.0);
    for (std::size_t j = 0; j < n; ++j)
      if (j != i) sum[lab[j]] += dissim[i][j];
    const double a = sum[lab[i]] / (size[lab[i]] - 1.0);
    double b = std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < k; ++c)
      if (c != lab[i]) b = std::min(b, sum[c] / size[c]);
    const double denom = std::max(a, b);
    total += denom > 0.0 ? (b - a) / denom : 0.0;
  }
  return total / static_cast<double>(n);
}

/// Silhouette under d(u,v) = 1 - s(u,v) for a sparse similarity graph (missing
/// edges have s = 0, d(u,u) = 0). Runs in O(edges + n k).
inline std::optional<double> similarity_silhouette(const std::vector<std::size_t>& labels, const WeightedGraph& g) {
  const std::size_t n = labels.size();
  if (g.num_nodes() != n) throw std::invalid_argument("silhouette: graph size differs from label count");
  std::size_t k = 0;
  const auto lab = detail::compact_labels(labels, &k);
  if (k < 2) return std::nullopt;
  std::vector<double> size(k, 0.0);
  for (auto l : lab) size[l] += 1.0;
  double total = 0.0;
  std::vector<double> sim(k);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t own = lab[i];
    if (size[own] <= 1.0) continue;
    std::fill(sim.begin(), sim.end(), 0.0);
    for (const auto& [j, s] : g.adj[i]) sim[lab[j]] += s;
    const double a = 1.0 - sim[own] / (size[own] - 1.0);
    double b = std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < k; ++c)
      if (c != own) b = std::min(b, 1.0 - sim[c] / size[c]);
    const double denom = std::max(a, b);
    total += denom > 0.0 ? (b - a) / denom : 0.0;
  }
  return total / static_cast<double>(n);
}

enum class TaskMode { multiclass, multilabel };

struct ClassificationScore {
  double accuracy = 0.0;
  double f1_micro = 0.0;
  double f1_macro = 0.0;
  double exact_match = 0.0;
};

/// decided[i] and gold[i] are sorted label sets for the same item.
inline ClassificationScore classification_scores(const std::vector<LabelSet>& decided,
                                                 const std::vector<LabelSet>& gold, TaskMode mode) {
  if (decided.size() != gold.size()) throw std::invalid_argument("classification_scores: size mismatch");
  ClassificationScore s;
  if (gold.empty()) return s;
  std::map<LabelId, std::array<double, 3>> per_label;  // tp, fp, fn
  double tp = 0, fp = 0, fn = 0, exact = 0;
  for (std::size_t i = 0; i < gold.size(); ++i) {
    const auto& g = gold[i];
    const auto& d = decided[i];
    if (g.empty()) throw std::invalid_argument("classification_scores: empty gold label set");
    if (mode == TaskMode::multiclass && g.size() != 1)
      throw std::invalid_argument("classification_scores: multiclass gold must be a single label");
    if (d == g) exact += 1.0;
    const std::set<LabelId> gs(g.begin(), g.end()), ds(d.begin(), d.end());
    for (LabelId l : ds) {
      auto& c = per_label[l];
      if (gs.count(l)) {
        c[0] += 1;
        tp += 1;
      } else {
        c[1] += 1;
        fp += 1;
      }
    }
    for (LabelId l : gs)
      if (!ds.count(l)) {
        per_label[l][2] += 1;
        fn += 1;
      }
  }
  auto f1 = [](double t, double p, double n) { return t > 0 ? 2 * t / (2 * t + p + n) : 0.0; };
  s.f1_micro = f1(tp, fp, fn);
  double macro = 0.0;
  for (const auto& [l, c] : per_label) macro += f1(c[0], c[1], c[2]);
  s.f1_macro = per_label.empty() ? 0.0 : macro / static_cast<double>(per_label.size());
  s.exact_match = exact / static_cast<double>(gold.size());
  s.accuracy = s.exact_match;
  return s;
}

}  // namespace intendd
