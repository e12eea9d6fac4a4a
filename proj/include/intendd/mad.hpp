#pragma once

// Modified Adsorption: label distributions over graph nodes from seed labels,
// neighbor smoothness and a dummy-label prior.
//
// The solver minimizes, per label column l,
//
//   sum_v  mu_inj p_inj(v) (Yhat_vl - Y_vl)^2
// + mu1    sum_{u<v} C_uv (Yhat_ul - Yhat_vl)^2,   C_uv = p_cont(u) M_uv + p_cont(v) M_vu
// + mu2    sum_v  p_abnd(v) (Yhat_vl - R_vl)^2
//
// i.e. the seed / smoothness / prior objective with each term weighted by the
// random-walk action probabilities (inject, continue, abandon) of its node.

#include <algorithm>
#include <cmath>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "intendd/graph.hpp"
#include "intendd/log.hpp"

namespace intendd {

/// Rows are nodes; columns are K real labels followed by the dummy label.
using LabelDistributionMatrix = Eigen::MatrixXd;

struct MadConfig {
  double mu1 = 1e-2;     // smoothness
  double mu2 = 1e-2;     // prior
  double mu_inj = 1.0;   // seed fidelity
  double beta = 2.0;     // random-walk discount, must exceed 1
  double tol = 1e-6;
  std::size_t max_iters = 1000;

  void validate() const {
    if (!(mu1 > 0 && mu2 > 0 && mu_inj > 0)) throw std::invalid_argument("MAD weights must be positive");
    if (!(beta > 1.0)) throw std::invalid_argument("MAD beta must exceed 1");
    if (!(tol > 0)) throw std::invalid_argument("MAD tol must be positive");
  }
};

struct MadProbabilities {
  std::vector<double> p_inj, p_cont, p_abnd;
};

/// Entropy heuristic over each node's transition row P_v = M_v. / sum(M_v.):
///   H = -sum P log P,  c = log b / (log b + log(b + e^H)),
///   d = (1 - c) sqrt(H) for seeds else 0,  z = max(c + d, 1),
///   p_cont = c / z,  p_inj = d / z,  p_abnd = 1 - p_cont - p_inj.
/// Isolated nodes never continue: p_inj = 1 for seeds, p_abnd = 1 otherwise.
inline MadProbabilities compute_probabilities(const WeightedGraph& g, const std::vector<bool>& seeds, double beta) {
  if (seeds.size() != g.num_nodes()) throw std::invalid_argument("seed mask size differs from graph size");
  if (!(beta > 1.0)) throw std::invalid_argument("beta must exceed 1");
  const std::size_t n = g.num_nodes();
  MadProbabilities p;
  p.p_inj.assign(n, 0.0);
  p.p_cont.assign(n, 0.0);
  p.p_abnd.assign(n, 0.0);
  const double log_beta = std::log(beta);
  for (NodeId v = 0; v < n; ++v) {
    double degree = 0.0;
    for (const auto& [u, w] : g.adj[v]) degree += w;
    if (!(degree > 0.0)) {
      p.p_inj[v] = seeds[v] ? 1.0 : 0.0;
      p.p_abnd[v] = 1.0 - p.p_inj[v];
      continue;
    }
    double h = 0.0;
    for (const auto& [u, w] : g.adj[v]) {
      const double t = w / degree;
      if (t > 0.0) h -= t * std::log(t);
    }
    h = std::max(h, 0.0);
    const double c = log_beta / (log_beta + std::log(beta + std::exp(h)));
    const double d = seeds[v] ? (1.0 - c) * std::sqrt(h) : 0.0;
    const double z = std::max(c + d, 1.0);
    p.p_cont[v] = c / z;
    p.p_inj[v] = d / z;
    p.p_abnd[v] = std::max(0.0, 1.0 - p.p_cont[v] - p.p_inj[v]);
  }
  return p;
}

/// R with all mass on the dummy label (last column).
inline LabelDistributionMatrix dummy_prior(std::size_t nodes, std::size_t num_labels) {
  LabelDistributionMatrix r = LabelDistributionMatrix::Zero(static_cast<Eigen::Index>(nodes),
                                                            static_cast<Eigen::Index>(num_labels + 1));
  r.col(static_cast<Eigen::Index>(num_labels)).setOnes();
  return r;
}

namespace detail {

struct MadSystem {
  std::vector<std::vector<std::pair<NodeId, double>>> coupling;  // C_uv, symmetric
  std::vector<double> seed_weight;                               // mu_inj p_inj
  std::vector<double> prior_weight;                              // mu2 p_abnd
};

inline MadSystem mad_system(const WeightedGraph& g, const std::vector<bool>& seeds, const MadConfig& cfg) {
  if (!g.is_symmetric(1e-9)) throw std::invalid_argument("MAD requires a symmetric graph");
  const auto p = compute_probabilities(g, seeds, cfg.beta);
  MadSystem s;
  const std::size_t n = g.num_nodes();
  s.coupling.resize(n);
  s.seed_weight.resize(n);
  s.prior_weight.resize(n);
  for (NodeId v = 0; v < n; ++v) {
    s.seed_weight[v] = cfg.mu_inj * p.p_inj[v];
    s.prior_weight[v] = cfg.mu2 * p.p_abnd[v];
    for (const auto& [u, w] : g.adj[v]) {
      const double c = p.p_cont[v] * w + p.p_cont[u] * g.weight(u, v);
      if (c > 0.0) s.coupling[v].emplace_back(u, c);
    }
  }
  return s;
}

inline void check_shapes(const WeightedGraph& g, const LabelDistributionMatrix& a, const LabelDistributionMatrix& b) {
  const auto n = static_cast<Eigen::Index>(g.num_nodes());
  if (a.rows() != n || b.rows() != n || a.cols() != b.cols())
    throw std::invalid_argument("MAD: label matrix dimensions do not agree with the graph");
}

inline double objective(const MadSystem& s, const LabelDistributionMatrix& y, const LabelDistributionMatrix& y_hat,
                        const LabelDistributionMatrix& r, double mu1) {
  double seed = 0.0, smooth = 0.0, prior = 0.0;
  for (std::size_t v = 0; v < s.coupling.size(); ++v) {
    const auto vi = static_cast<Eigen::Index>(v);
    seed += s.seed_weight[v] * (y_hat.row(vi) - y.row(vi)).squaredNorm();
    prior += s.prior_weight[v] * (y_hat.row(vi) - r.row(vi)).squaredNorm();
    for (const auto& [u, c] : s.coupling[v])
      if (u > v) smooth += c * (y_hat.row(vi) - y_hat.row(static_cast<Eigen::Index>(u))).squaredNorm();
  }
  return seed + mu1 * smooth + prior;
}

}  // namespace detail

inline double mad_objective(const WeightedGraph& g, const LabelDistributionMatrix& y,
                            const LabelDistributionMatrix& y_hat, const LabelDistributionMatrix& r,
                            const std::vector<bool>& seeds, const MadConfig& cfg) {
  detail::check_shapes(g, y, y_hat);
  detail::check_shapes(g, y, r);
  return detail::objective(detail::mad_system(g, seeds, cfg), y, y_hat, r, cfg.mu1);
}

struct MadIteration {
  std::size_t iter = 0;
  double objective = 0.0;
  double max_delta = 0.0;
};

struct MadResult {
  LabelDistributionMatrix y_hat;
  std::vector<MadIteration> trace;
  bool converged = false;
};

/// Jacobi iteration: every row is recomputed from the previous iterate as the
/// exact minimizer of the objective in that row. The objective is non-increasing
/// because every node carries positive seed or prior weight.
inline MadResult mad_solve(const WeightedGraph& g, const LabelDistributionMatrix& y, const std::vector<bool>& seeds,
                           const LabelDistributionMatrix& r, const MadConfig& cfg = {}, bool record_objective = true) {
  cfg.validate();
  detail::check_shapes(g, y, r);
  const auto s = detail::mad_system(g, seeds, cfg);
  const std::size_t n = g.num_nodes();
  MadResult out;
  LabelDistributionMatrix cur = y;
  LabelDistributionMatrix next(cur.rows(), cur.cols());
  if (record_objective) out.trace.push_back({0, detail::objective(s, y, cur, r, cfg.mu1), 0.0});
  for (std::size_t it = 1; it <= cfg.max_iters; ++it) {
    for (std::size_t v = 0; v < n; ++v) {
      const auto vi = static_cast<Eigen::Index>(v);
      double z = s.seed_weight[v] + s.prior_weight[v];
      auto row = next.row(vi);
      row = s.seed_weight[v] * y.row(vi) + s.prior_weight[v] * r.row(vi);
      for (const auto& [u, c] : s.coupling[v]) {
        row += cfg.mu1 * c * cur.row(static_cast<Eigen::Index>(u));
        z += cfg.mu1 * c;
      }
      if (z > 0.0) row /= z;
      else row = cur.row(vi);
    }
    const double delta = n == 0 ? 0.0 : (next - cur).cwiseAbs().maxCoeff();
    cur.swap(next);
    MadIteration rec{it, record_objective ? detail::objective(s, y, cur, r, cfg.mu1) : 0.0, delta};
    out.trace.push_back(rec);
    if (delta < cfg.tol) {
      out.converged = true;
      break;
    }
  }
  if (!out.converged && cfg.max_iters > 0)
    log::warn("MAD did not converge within " + std::to_string(cfg.max_iters) + " iterations");
  out.y_hat = std::move(cur);
  return out;
}

/// Diagnostic stream "iter,objective,max_delta".
inline void write_mad_trace_csv(std::ostream& out, const std::vector<MadIteration>& trace) {
  out << "iter,objective,max_delta\n";
  const auto old = out.precision(17);
  for (const auto& t : trace) out << t.iter << ',' << t.objective << ',' << t.max_delta << '\n';
  out.precision(old);
}

}  // namespace intendd
