#pragma once

// Base classifier (one-hidden-layer MLP on frozen utterance features) and the two
// MAD post-processing steps: residual propagation and label smoothing.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <istream>
#include <numeric>
#include <ostream>
#include <random>
#include <set>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include <Eigen/Dense>

#include "intendd/corpus.hpp"
#include "intendd/error.hpp"
#include "intendd/graph.hpp"
#include "intendd/mad.hpp"
#include "intendd/metrics.hpp"

namespace intendd {

struct MlpModel {
  Eigen::MatrixXd w1;  // dim x h
  Eigen::VectorXd b1;  // h
  Eigen::MatrixXd w2;  // h x K
  Eigen::VectorXd b2;  // K
  TaskMode mode = TaskMode::multiclass;

  Eigen::Index input_dim() const { return w1.rows(); }
  Eigen::Index hidden() const { return w1.cols(); }
  Eigen::Index num_labels() const { return w2.cols(); }

  static MlpModel zeros(Eigen::Index dim, Eigen::Index hidden, Eigen::Index labels, TaskMode mode) {
    return {Eigen::MatrixXd::Zero(dim, hidden), Eigen::VectorXd::Zero(hidden), Eigen::MatrixXd::Zero(hidden, labels),
            Eigen::VectorXd::Zero(labels), mode};
  }
};

struct TrainConfig {
  std::size_t epochs = 200;
  double learning_rate = 1e-3;
  double label_smoothing_eps = 0.1;
  Eigen::Index hidden_size = 256;
  std::uint64_t rng_seed = 0;
  std::size_t batch_size = 32;

  void validate() const {
    if (epochs == 0 || batch_size == 0 || hidden_size < 1) throw std::invalid_argument("invalid training config");
    if (!(learning_rate > 0)) throw std::invalid_argument("learning_rate must be positive");
    if (!(label_smoothing_eps >= 0 && label_smoothing_eps < 1))
      throw std::invalid_argument("label_smoothing_eps must lie in [0,1)");
  }
};

struct PredictionMatrix {
  std::vector<std::string> ids;
  Eigen::MatrixXd scores;  // ids.size() x K
  TaskMode mode = TaskMode::multiclass;
};

// ---------------------------------------------------------------------------
// Forward / loss / gradients

namespace detail {

inline Eigen::MatrixXd softmax_rows(const Eigen::MatrixXd& z) {
  Eigen::MatrixXd out = z;
  for (Eigen::Index i = 0; i < z.rows(); ++i) {
    const double mx = z.row(i).maxCoeff();
    out.row(i) = (z.row(i).array() - mx).exp();
    out.row(i) /= out.row(i).sum();
  }
  return out;
}

inline Eigen::MatrixXd sigmoid(const Eigen::MatrixXd& z) {
  return z.unaryExpr([](double x) {
    if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
  });
}

inline double log_sigmoid(double x) { return x >= 0 ? -std::log1p(std::exp(-x)) : x - std::log1p(std::exp(x)); }

}  // namespace detail

struct ForwardPass {
  Eigen::MatrixXd hidden;  // post-activation
  Eigen::MatrixXd logits;
  Eigen::MatrixXd probs;
};

inline ForwardPass forward(const MlpModel& m, const Eigen::MatrixXd& x) {
  ForwardPass f;
  f.hidden = ((x * m.w1).rowwise() + m.b1.transpose()).cwiseMax(0.0);
  f.logits = (f.hidden * m.w2).rowwise() + m.b2.transpose();
  f.probs = m.mode == TaskMode::multiclass ? detail::softmax_rows(f.logits) : detail::sigmoid(f.logits);
  return f;
}

/// Multiclass: (1 - eps) on gold plus eps / K everywhere. Multilabel: toward 0.5 by eps.
inline Eigen::MatrixXd smooth_targets(const Eigen::MatrixXd& gold, double eps, TaskMode mode) {
  if (mode == TaskMode::multiclass) return ((1.0 - eps) * gold).array() + eps / static_cast<double>(gold.cols());
  return ((1.0 - eps) * gold).array() + 0.5 * eps;
}

/// Mean per-example loss for already-smoothed targets.
inline double loss(const MlpModel& m, const ForwardPass& f, const Eigen::MatrixXd& targets) {
  const auto n = static_cast<double>(f.logits.rows());
  double total = 0.0;
  if (m.mode == TaskMode::multiclass) {
    for (Eigen::Index i = 0; i < f.logits.rows(); ++i) {
      const double mx = f.logits.row(i).maxCoeff();
      const double lse = mx + std::log((f.logits.row(i).array() - mx).exp().sum());
      total -= (targets.row(i).array() * (f.logits.row(i).array() - lse)).sum();
    }
  } else {
    for (Eigen::Index i = 0; i < f.logits.rows(); ++i)
      for (Eigen::Index j = 0; j < f.logits.cols(); ++j) {
        const double z = f.logits(i, j), t = targets(i, j);
        total -= t * detail::log_sigmoid(z) + (1.0 - t) * detail::log_sigmoid(-z);
      }
  }
  return total / n;
}

inline double loss(const MlpModel& m, const Eigen::MatrixXd& x, const Eigen::MatrixXd& targets) {
  return loss(m, forward(m, x), targets);
}

struct MlpGradients {
  Eigen::MatrixXd w1;
  Eigen::VectorXd b1;
  Eigen::MatrixXd w2;
  Eigen::VectorXd b2;
  double loss = 0.0;
};

inline MlpGradients loss_and_gradients(const MlpModel& m, const Eigen::MatrixXd& x, const Eigen::MatrixXd& targets) {
  const auto f = forward(m, x);
  MlpGradients g;
  g.loss = loss(m, f, targets);
  // Softmax + cross-entropy and sigmoid + binary cross-entropy share dL/dz = p - t.
  const Eigen::MatrixXd dz = (f.probs - targets) / static_cast<double>(x.rows());
  g.w2 = f.hidden.transpose() * dz;
  g.b2 = dz.colwise().sum().transpose();
  const Eigen::MatrixXd dh = (dz * m.w2.transpose()).cwiseProduct((f.hidden.array() > 0.0).cast<double>().matrix());
  g.w1 = x.transpose() * dh;
  g.b1 = dh.colwise().sum().transpose();
  return g;
}

// ---------------------------------------------------------------------------
// Training (mini-batch Adam)

inline MlpModel init_mlp(Eigen::Index dim, Eigen::Index hidden, Eigen::Index labels, TaskMode mode,
                         std::mt19937_64& rng) {
  auto m = MlpModel::zeros(dim, hidden, labels, mode);
  auto fill = [&](Eigen::MatrixXd& w) {
    const double limit = std::sqrt(6.0 / static_cast<double>(w.rows() + w.cols()));
    std::uniform_real_distribution<double> dist(-limit, limit);
    for (Eigen::Index j = 0; j < w.cols(); ++j)
      for (Eigen::Index i = 0; i < w.rows(); ++i) w(i, j) = dist(rng);
  };
  fill(m.w1);
  fill(m.w2);
  return m;
}

/// x: one row per training example; gold: one-hot / multi-hot rows over K labels.
inline MlpModel train_mlp(const Eigen::MatrixXd& x, const Eigen::MatrixXd& gold, TaskMode mode,
                          const TrainConfig& cfg = {}) {
  cfg.validate();
  if (x.rows() == 0) throw DataError("no training examples");
  if (gold.rows() != x.rows()) throw std::invalid_argument("feature and label row counts differ");
  std::mt19937_64 rng(cfg.rng_seed);
  MlpModel m = init_mlp(x.cols(), cfg.hidden_size, gold.cols(), mode, rng);
  const Eigen::MatrixXd targets = smooth_targets(gold, cfg.label_smoothing_eps, mode);

  constexpr double b1 = 0.9, b2 = 0.999, eps = 1e-8;
  MlpModel mom = MlpModel::zeros(m.input_dim(), m.hidden(), m.num_labels(), mode);
  MlpModel var = mom;
  std::size_t step = 0;
  auto adam = [&](auto& param, const auto& grad, auto& mv, auto& vv, double c1, double c2) {
    mv = b1 * mv + (1.0 - b1) * grad;
    vv = b2 * vv + (1.0 - b2) * grad.cwiseProduct(grad);
    param.array() -= cfg.learning_rate * (mv.array() / c1) / ((vv.array() / c2).sqrt() + eps);
  };

  std::vector<Eigen::Index> order(static_cast<std::size_t>(x.rows()));
  std::iota(order.begin(), order.end(), 0);
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t end = std::min(order.size(), start + cfg.batch_size);
      const auto bs = static_cast<Eigen::Index>(end - start);
      Eigen::MatrixXd xb(bs, x.cols()), tb(bs, targets.cols());
      for (Eigen::Index r = 0; r < bs; ++r) {
        xb.row(r) = x.row(order[start + static_cast<std::size_t>(r)]);
        tb.row(r) = targets.row(order[start + static_cast<std::size_t>(r)]);
      }
      const auto g = loss_and_gradients(m, xb, tb);
      ++step;
      const double c1 = 1.0 - std::pow(b1, static_cast<double>(step));
      const double c2 = 1.0 - std::pow(b2, static_cast<double>(step));
      adam(m.w1, g.w1, mom.w1, var.w1, c1, c2);
      adam(m.b1, g.b1, mom.b1, var.b1, c1, c2);
      adam(m.w2, g.w2, mom.w2, var.w2, c1, c2);
      adam(m.b2, g.b2, mom.b2, var.b2, c1, c2);
    }
  }
  return m;
}

inline Eigen::MatrixXd feature_matrix(const EmbeddingTable& table, const std::vector<std::string>& ids) {
  Eigen::MatrixXd x(static_cast<Eigen::Index>(ids.size()), static_cast<Eigen::Index>(table.dim));
  for (std::size_t i = 0; i < ids.size(); ++i) {
    const auto& v = table.at(ids[i]);
    for (std::size_t d = 0; d < table.dim; ++d) x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(d)) = v[d];
  }
  return x;
}

/// One-hot / multi-hot rows over K labels.
inline Eigen::MatrixXd gold_matrix(const Dataset& ds, const std::vector<std::string>& ids) {
  const auto index = ds.index();
  Eigen::MatrixXd y = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(ids.size()), ds.num_intents);
  for (std::size_t i = 0; i < ids.size(); ++i)
    for (LabelId l : ds.utterances[index.at(ids[i])].labels) y(static_cast<Eigen::Index>(i), l) = 1.0;
  return y;
}

/// Trains on the train split, or on `train_ids` when given.
inline MlpModel train_mlp(const EmbeddingTable& features, const Dataset& ds, TaskMode mode, const TrainConfig& cfg = {},
                          const std::set<std::string>* train_ids = nullptr) {
  std::vector<std::string> ids;
  for (const auto& u : ds.utterances) {
    if (train_ids ? !train_ids->count(u.id) : u.split != Split::train) continue;
    if (u.labels.empty()) throw DataError("training utterance '" + u.id + "' has no label");
    if (mode == TaskMode::multiclass && u.labels.size() != 1)
      throw DataError("multiclass training utterance '" + u.id + "' must have exactly one label");
    ids.push_back(u.id);
  }
  if (ids.empty()) throw DataError("empty train split");
  if (ds.num_intents < 1) throw DataError("dataset has no labels");
  return train_mlp(feature_matrix(features, ids), gold_matrix(ds, ids), mode, cfg);
}

inline PredictionMatrix predict(const MlpModel& m, const EmbeddingTable& features, const std::vector<std::string>& ids) {
  PredictionMatrix p;
  p.ids = ids;
  p.mode = m.mode;
  if (static_cast<std::size_t>(m.input_dim()) != features.dim && !ids.empty())
    throw DataError("feature dimension differs from model input dimension");
  p.scores = forward(m, feature_matrix(features, ids)).probs;
  return p;
}

// ---------------------------------------------------------------------------
// Checkpoint: magic "INTDMLP\0", u32 version, u32 mode, u64 dim, hidden, K,
// then row-major doubles w1, b1, w2, b2. Host byte order (little-endian).

inline constexpr char kCheckpointMagic[8] = {'I', 'N', 'T', 'D', 'M', 'L', 'P', '\0'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

inline void save_checkpoint(std::ostream& out, const MlpModel& m) {
  auto put = [&](const auto& v) { out.write(reinterpret_cast<const char*>(&v), sizeof v); };
  out.write(kCheckpointMagic, sizeof kCheckpointMagic);
  put(kCheckpointVersion);
  put(static_cast<std::uint32_t>(m.mode == TaskMode::multiclass ? 0 : 1));
  put(static_cast<std::uint64_t>(m.input_dim()));
  put(static_cast<std::uint64_t>(m.hidden()));
  put(static_cast<std::uint64_t>(m.num_labels()));
  auto put_matrix = [&](const Eigen::MatrixXd& a) {
    for (Eigen::Index i = 0; i < a.rows(); ++i)
      for (Eigen::Index j = 0; j < a.cols(); ++j) put(a(i, j));
  };
  put_matrix(m.w1);
  put_matrix(m.b1);
  put_matrix(m.w2);
  put_matrix(m.b2);
  if (!out) throw DataError("failed to write checkpoint");
}

inline MlpModel load_checkpoint(std::istream& in) {
  auto get = [&](auto& v) {
    in.read(reinterpret_cast<char*>(&v), sizeof v);
    if (!in) throw DataError("truncated checkpoint");
  };
  char magic[8];
  in.read(magic, sizeof magic);
  if (!in || std::memcmp(magic, kCheckpointMagic, sizeof magic) != 0) throw DataError("not a model checkpoint");
  std::uint32_t version = 0, mode = 0;
  std::uint64_t dim = 0, hidden = 0, labels = 0;
  get(version);
  if (version != kCheckpointVersion) throw DataError("unsupported checkpoint version " + std::to_string(version));
  get(mode);
  get(dim);
  get(hidden);
  get(labels);
  if (mode > 1 || hidden == 0) throw DataError("corrupt checkpoint header");
  auto m = MlpModel::zeros(static_cast<Eigen::Index>(dim), static_cast<Eigen::Index>(hidden),
                           static_cast<Eigen::Index>(labels), mode == 0 ? TaskMode::multiclass : TaskMode::multilabel);
  auto get_matrix = [&](auto& a) {
    for (Eigen::Index i = 0; i < a.rows(); ++i)
      for (Eigen::Index j = 0; j < a.cols(); ++j) get(a(i, j));
  };
  get_matrix(m.w1);
  get_matrix(m.b1);
  get_matrix(m.w2);
  get_matrix(m.b2);
  return m;
}

// ---------------------------------------------------------------------------
// Post-processing over G_pred (singleton nodes, one per utterance).

namespace detail {

inline std::vector<Eigen::Index> align_rows(const WeightedGraph& g, const PredictionMatrix& p) {
  std::unordered_map<std::string, Eigen::Index> row_of;
  for (std::size_t i = 0; i < p.ids.size(); ++i) row_of.emplace(p.ids[i], static_cast<Eigen::Index>(i));
  std::vector<Eigen::Index> rows;
  rows.reserve(g.num_nodes());
  for (const auto& n : g.nodes) {
    if (n.member_ids.size() != 1) throw std::invalid_argument("post-processing expects singleton graph nodes");
    auto it = row_of.find(n.member_ids.front());
    if (it == row_of.end()) throw DataError("no prediction for node '" + n.member_ids.front() + "'");
    rows.push_back(it->second);
  }
  return rows;
}

inline std::vector<std::string> node_ids(const WeightedGraph& g) {
  std::vector<std::string> ids;
  for (const auto& n : g.nodes) ids.push_back(n.member_ids.front());
  return ids;
}

/// Multiclass: clip at 0 and renormalize (an all-zero row falls back to `fallback`).
/// Multilabel: clip to [0,1].
inline void project_rows(Eigen::MatrixXd& s, const Eigen::MatrixXd& fallback, TaskMode mode) {
  if (mode == TaskMode::multilabel) {
    s = s.cwiseMax(0.0).cwiseMin(1.0);
    return;
  }
  s = s.cwiseMax(0.0);
  for (Eigen::Index i = 0; i < s.rows(); ++i) {
    const double sum = s.row(i).sum();
    if (sum > 0.0) s.row(i) /= sum;
    else s.row(i) = fallback.row(i);
  }
}

}  // namespace detail

struct PostProcessResult {
  PredictionMatrix predictions;
  MadResult mad;
};

/// Seeds MAD with residuals gold - base on seed nodes (zero elsewhere, dummy 0),
/// then adds the smoothed residuals back to the base predictions.
inline PostProcessResult propagate_residuals_detailed(const WeightedGraph& g_pred, const PredictionMatrix& base,
                                                      const Dataset& ds, const std::set<std::string>& seed_ids,
                                                      const MadConfig& cfg = {}) {
  const auto rows = detail::align_rows(g_pred, base);
  const auto ids = detail::node_ids(g_pred);
  const Eigen::Index n = static_cast<Eigen::Index>(ids.size());
  const Eigen::Index k = base.scores.cols();
  Eigen::MatrixXd base_nodes(n, k);
  for (Eigen::Index i = 0; i < n; ++i) base_nodes.row(i) = base.scores.row(rows[static_cast<std::size_t>(i)]);

  const auto gold = gold_matrix(ds, ids);
  if (gold.cols() != k) throw std::invalid_argument("label count differs between dataset and predictions");
  Eigen::MatrixXd y = Eigen::MatrixXd::Zero(n, k + 1);
  std::vector<bool> seeds(static_cast<std::size_t>(n), false);
  for (Eigen::Index i = 0; i < n; ++i) {
    if (!seed_ids.count(ids[static_cast<std::size_t>(i)])) continue;
    seeds[static_cast<std::size_t>(i)] = true;
    y.row(i).head(k) = gold.row(i) - base_nodes.row(i);
  }
  PostProcessResult out;
  out.mad = mad_solve(g_pred, y, seeds, dummy_prior(static_cast<std::size_t>(n), static_cast<std::size_t>(k)), cfg);
  Eigen::MatrixXd corrected = base_nodes + out.mad.y_hat.leftCols(k);
  detail::project_rows(corrected, base_nodes, base.mode);
  out.predictions = {ids, std::move(corrected), base.mode};
  return out;
}

inline PredictionMatrix propagate_residuals(const WeightedGraph& g_pred, const PredictionMatrix& base,
                                            const Dataset& ds, const std::set<std::string>& seed_ids,
                                            const MadConfig& cfg = {}) {
  return propagate_residuals_detailed(g_pred, base, ds, seed_ids, cfg).predictions;
}

/// Every node is a seed: gold distributions on seed utterances, corrected rows elsewhere.
inline PostProcessResult smooth_labels_detailed(const WeightedGraph& g_pred, const PredictionMatrix& corrected,
                                                const Dataset& ds, const std::set<std::string>& seed_ids,
                                                const MadConfig& cfg = {}) {
  const auto rows = detail::align_rows(g_pred, corrected);
  const auto ids = detail::node_ids(g_pred);
  const Eigen::Index n = static_cast<Eigen::Index>(ids.size());
  const Eigen::Index k = corrected.scores.cols();
  const auto gold = gold_matrix(ds, ids);
  if (gold.cols() != k) throw std::invalid_argument("label count differs between dataset and predictions");

  Eigen::MatrixXd y = Eigen::MatrixXd::Zero(n, k + 1);
  Eigen::MatrixXd start(n, k);
  for (Eigen::Index i = 0; i < n; ++i) {
    start.row(i) = corrected.scores.row(rows[static_cast<std::size_t>(i)]);
    if (seed_ids.count(ids[static_cast<std::size_t>(i)])) {
      Eigen::RowVectorXd g = gold.row(i);
      if (corrected.mode == TaskMode::multiclass && g.sum() > 0) g /= g.sum();
      y.row(i).head(k) = g;
    } else {
      y.row(i).head(k) = start.row(i);
    }
  }
  const std::vector<bool> seeds(static_cast<std::size_t>(n), true);
  PostProcessResult out;
  out.mad = mad_solve(g_pred, y, seeds, dummy_prior(static_cast<std::size_t>(n), static_cast<std::size_t>(k)), cfg);
  Eigen::MatrixXd smoothed = out.mad.y_hat.leftCols(k);
  detail::project_rows(smoothed, start, corrected.mode);
  out.predictions = {ids, std::move(smoothed), corrected.mode};
  return out;
}

inline PredictionMatrix smooth_labels(const WeightedGraph& g_pred, const PredictionMatrix& corrected,
                                      const Dataset& ds, const std::set<std::string>& seed_ids,
                                      const MadConfig& cfg = {}) {
  return smooth_labels_detailed(g_pred, corrected, ds, seed_ids, cfg).predictions;
}

// ---------------------------------------------------------------------------
// Decisions

inline constexpr double kDefaultMultilabelThreshold = 0.5;

/// Multiclass: argmax (lowest index on ties). Multilabel: labels scoring above
/// the threshold, or the argmax singleton when none does.
inline std::vector<LabelSet> decide(const PredictionMatrix& final_scores, TaskMode mode,
                                    double threshold = kDefaultMultilabelThreshold) {
  if (mode == TaskMode::multilabel && !(threshold > 0.0 && threshold < 1.0))
    throw std::invalid_argument("multilabel threshold must lie in (0,1)");
  std::vector<LabelSet> out;
  out.reserve(static_cast<std::size_t>(final_scores.scores.rows()));
  for (Eigen::Index i = 0; i < final_scores.scores.rows(); ++i) {
    const auto row = final_scores.scores.row(i);
    LabelSet labels;
    if (mode == TaskMode::multilabel)
      for (Eigen::Index j = 0; j < row.size(); ++j)
        if (row(j) > threshold) labels.push_back(static_cast<LabelId>(j));
    if (labels.empty() && row.size() > 0) {
      Eigen::Index best = 0;
      for (Eigen::Index j = 1; j < row.size(); ++j)
        if (row(j) > row(best)) best = j;
      labels.push_back(static_cast<LabelId>(best));
    }
    out.push_back(std::move(labels));
  }
  return out;
}

/// Picks the multilabel threshold maximizing exact match on the given rows
/// (ties keep the smaller threshold).
inline double tune_threshold(const PredictionMatrix& scores, const std::vector<LabelSet>& gold,
                             const std::vector<double>& grid) {
  double best_t = kDefaultMultilabelThreshold, best = -1.0;
  for (double t : grid) {
    const auto em = classification_scores(decide(scores, TaskMode::multilabel, t), gold, TaskMode::multilabel).exact_match;
    if (em > best) {
      best = em;
      best_t = t;
    }
  }
  return best_t;
}

}  // namespace intendd
