#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <map>
#include <numeric>
#include <random>
#include <span>
#include <stdexcept>
#include <utility>
#include <vector>

#include "nss/common.hpp"
#include "nss/graph.hpp"
#include "nss/observation.hpp"
#include "nss/perceptron.hpp"
#include "nss/spreading.hpp"

namespace nss {

struct MessageUpdate {
  double delta = 0.0;  // max-abs change of the table
  bool contradiction = false;
};

struct SweepResult {
  double delta = 0.0;
  bool contradiction = false;
  std::size_t failed_edge = 0;
};

struct NuEstimate {
  BinaryDistribution nu;
  double log_z = 0.0;  // log Z_i^nu, -inf on contradiction
};

// Belief propagation over transition times. The message on directed edge
// d = i -> j is a K x K table m[t_i][t_j] with K = T + 2, index t + 1.
//
// The node factor of a non-source with neighbors k is
//   S(t_i) - [t_i < T] S(t_i + 1),  S(t) = prod_k g_k(t_k, t),
//   g_k(t_k, t) = prod_{s < t} (1 - lambda_ki [k infectious at s]),
// so every sum over neighbor times factorizes into per-neighbor sums and an
// update costs O(deg K^2).
class BpEngine {
 public:
  BpEngine(const SparseGraph& g, const SpreadParams& params, const ObservationSet& obs)
      : g_(g), T_(params.T), K_(params.T + 2), eta_(g.n_nodes()) {
    params.validate();
    build_kernels(params);
    obs_weight_.assign(g.n_nodes() * K_, 1.0);
    for (std::size_t i = 0; i < g.n_nodes(); ++i)
      for (int t = -1; t <= T_; ++t) obs_weight_[i * K_ + (t + 1)] = obs_likelihood(obs, i, t);
    messages_.resize(g.n_directed() * K_ * K_);
    reset_uniform();
    pa_.resize(K_);
    pb_.resize(K_);
    proposal_.resize(K_ * K_);
  }

  int horizon() const noexcept { return T_; }
  int table_size() const noexcept { return K_; }
  const SparseGraph& graph() const noexcept { return g_; }

  void reset_uniform() {
    std::fill(messages_.begin(), messages_.end(), 1.0 / static_cast<double>(K_ * K_));
  }

  void set_eta(std::size_t i, BinaryDistribution eta) { eta_[i] = eta; }
  void set_eta(std::span<const BinaryDistribution> eta) { std::copy(eta.begin(), eta.end(), eta_.begin()); }
  void set_uniform_eta(BinaryDistribution eta) { std::fill(eta_.begin(), eta_.end(), eta); }
  const BinaryDistribution& eta(std::size_t i) const { return eta_[i]; }

  std::span<const double> message(std::size_t d) const { return {messages_.data() + d * K_ * K_, std::size_t(K_ * K_)}; }
  std::span<double> message(std::size_t d) { return {messages_.data() + d * K_ * K_, std::size_t(K_ * K_)}; }

  // Recompute the message on directed edge d with damping
  // new = (1 - damping) * proposal + damping * old.
  MessageUpdate update_message(std::size_t d, double damping = 0.0) {
    const std::size_t i = g_.tail(d), j = g_.head(d);
    accumulate(i, j);
    const double* gj = kernel(d ^ 1);  // j -> i
    const double* w = obs_weight_.data() + i * K_;
    const auto& eta = eta_[i];
    const double source = eta.minus * w[0] * pc_;
    double total = 0.0;
    for (int tj = 0; tj < K_; ++tj) proposal_[tj] = source;
    total += source * K_;
    for (int t = 0; t <= T_; ++t) {
      double* row = proposal_.data() + (t + 1) * K_;
      const double scale = eta.plus * w[t + 1];
      if (scale == 0.0) {
        std::fill_n(row, K_, 0.0);
        continue;
      }
      for (int tj = 0; tj < K_; ++tj) {
        const double* gk = gj + tj * (T_ + 1);
        double v = gk[t] * pa_[t];
        if (t < T_) v -= gk[t + 1] * pb_[t];
        v = v > 0.0 ? scale * v : 0.0;
        row[tj] = v;
        total += v;
      }
    }
    MessageUpdate res;
    if (!(total > 0.0) || !std::isfinite(total)) {
      res.contradiction = true;
      return res;
    }
    auto old = message(d);
    const double inv = 1.0 / total;
    double delta = 0.0;
    for (std::size_t k = 0; k < proposal_.size(); ++k) {
      const double v = (1.0 - damping) * proposal_[k] * inv + damping * old[k];
      delta = std::max(delta, std::abs(v - old[k]));
      old[k] = v;
    }
    res.delta = delta;
    return res;
  }

  // One asynchronous pass over all directed edges in a fresh random order.
  SweepResult sweep(rng_t& rng, double damping) {
    order_.resize(g_.n_directed());
    std::iota(order_.begin(), order_.end(), std::size_t{0});
    std::shuffle(order_.begin(), order_.end(), rng);
    SweepResult out;
    for (auto d : order_) {
      auto r = update_message(d, damping);
      if (r.contradiction) {
        out.contradiction = true;
        out.failed_edge = d;
        return out;
      }
      out.delta = std::max(out.delta, r.delta);
    }
    return out;
  }

  // Cavity belief on the initial state, without the node's own field eta.
  NuEstimate compute_nu(std::size_t i) {
    accumulate(i, g_.n_nodes());
    const double* w = obs_weight_.data() + i * K_;
    double minus = w[0] * pc_, plus = 0.0;
    for (int t = 0; t <= T_; ++t) plus += w[t + 1] * factor_sum(t);
    const double z = minus + plus;
    NuEstimate out;
    if (!(z > 0.0)) {
      out.log_z = -kInf;
      return out;
    }
    out.nu = {plus / z, minus / z};
    out.log_z = std::log(z);
    return out;
  }

  // Marginal of t_i (index t + 1) including the field eta_i; returns the log
  // of its normalizer sum_x eta(x) Z_i^nu(x) through `log_z`.
  std::vector<double> node_belief(std::size_t i, double* log_z = nullptr) {
    accumulate(i, g_.n_nodes());
    const double* w = obs_weight_.data() + i * K_;
    std::vector<double> b(K_);
    b[0] = eta_[i].minus * w[0] * pc_;
    for (int t = 0; t <= T_; ++t) b[t + 1] = eta_[i].plus * w[t + 1] * factor_sum(t);
    double z = std::accumulate(b.begin(), b.end(), 0.0);
    if (log_z) *log_z = z > 0.0 ? std::log(z) : -kInf;
    if (z > 0.0)
      for (double& x : b) x /= z;
    return b;
  }

  // log sum_{t_i, t_j} m_{i->j}(t_i, t_j) m_{j->i}(t_j, t_i)
  double edge_free_entropy(std::size_t edge) const {
    auto fwd = message(2 * edge), back = message(2 * edge + 1);
    double s = 0.0;
    for (int a = 0; a < K_; ++a)
      for (int b = 0; b < K_; ++b) s += fwd[a * K_ + b] * back[b * K_ + a];
    return s > 0.0 ? std::log(s) : -kInf;
  }

  double obs_weight(std::size_t i, int t) const { return obs_weight_[i * K_ + (t + 1)]; }

 private:
  // Per-neighbor sums for node i, skipping neighbor `excluded`.
  void accumulate(std::size_t i, std::size_t excluded) {
    pc_ = 1.0;
    std::fill(pa_.begin(), pa_.end(), 1.0);
    std::fill(pb_.begin(), pb_.end(), 1.0);
    for (const auto& arc : g_.arcs(i)) {
      if (arc.neighbor == excluded) continue;
      const std::size_t din = g_.directed_from(arc.edge, arc.neighbor);
      const double* m = messages_.data() + din * K_ * K_;  // m[t_k][t_i]
      const double* gk = kernel(din);
      double c = 0.0;
      for (int tk = 0; tk < K_; ++tk) c += m[tk * K_];
      pc_ *= c;
      for (int t = 0; t <= T_; ++t) {
        double a = 0.0, b = 0.0;
        for (int tk = 0; tk < K_; ++tk) {
          const double mv = m[tk * K_ + t + 1];
          a += mv * gk[tk * (T_ + 1) + t];
          if (t < T_) b += mv * gk[tk * (T_ + 1) + t + 1];
        }
        pa_[t] *= a;
        pb_[t] *= b;
      }
    }
  }

  double factor_sum(int t) const {
    const double v = t < T_ ? pa_[t] - pb_[t] : pa_[t];
    return v > 0.0 ? v : 0.0;
  }

  const double* kernel(std::size_t d) const { return kernels_[kernel_index_[d]].data(); }

  void build_kernels(const SpreadParams& params) {
    std::map<std::pair<double, int>, std::size_t> cache;
    kernel_index_.resize(g_.n_directed());
    for (std::size_t d = 0; d < g_.n_directed(); ++d) {
      const double lam = g_.lambda(d, params.lambda);
      const int delta = params.delta(g_.tail(d));
      auto [it, inserted] = cache.try_emplace({lam, delta}, kernels_.size());
      if (inserted) kernels_.push_back(make_kernel(lam, delta));
      kernel_index_[d] = it->second;
    }
  }

  // g(t_k, t) for t_k in {-1..T} (row t_k + 1), t in {0..T}.
  std::vector<double> make_kernel(double lam, int delta) const {
    std::vector<double> k(K_ * (T_ + 1));
    for (int tk = -1; tk <= T_; ++tk)
      for (int t = 0; t <= T_; ++t) {
        int active = 0;
        for (int s = 0; s < t; ++s) active += is_infectious(tk, s, delta) ? 1 : 0;
        k[(tk + 1) * (T_ + 1) + t] = std::pow(1.0 - lam, active);
      }
    return k;
  }

  const SparseGraph& g_;
  int T_, K_;
  std::vector<BinaryDistribution> eta_;
  std::vector<double> obs_weight_;
  std::vector<double> messages_;
  std::vector<std::vector<double>> kernels_;
  std::vector<std::size_t> kernel_index_;
  std::vector<double> pa_, pb_, proposal_;
  std::vector<std::size_t> order_;
  double pc_ = 1.0;
};

}  // namespace nss
