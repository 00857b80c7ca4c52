#pragma once

#include <climits>
#include <cstdio>
#include <cstddef>
#include <istream>
#include <ostream>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "nss/common.hpp"
#include "nss/graph.hpp"

namespace nss {

enum class SpreadModel { SI, dSIR };

inline constexpr int kNoRecovery = INT_MAX / 4;

struct SpreadParams {
  SpreadModel model = SpreadModel::SI;
  int T = 0;  // horizon; transition times live in {-1, ..., T}
  double lambda = 1.0;
  int delta_rec = 1;  // recovery delay, dSIR only
  int t_max = 10000;  // cap on the simulated horizon
  std::vector<int> node_delta;  // optional per-node override of delta_rec

  // Infectious period of node k; SI never recovers.
  int delta(std::size_t k) const {
    if (model == SpreadModel::SI) return kNoRecovery;
    return node_delta.empty() ? delta_rec : node_delta[k];
  }

  void validate() const {
    if (!(lambda >= 0.0 && lambda <= 1.0)) throw std::invalid_argument("lambda outside [0,1]");
    if (model == SpreadModel::dSIR && delta_rec < 1) throw std::invalid_argument("recovery delay must be >= 1");
    if (T < 0) throw std::invalid_argument("negative horizon");
  }
};

inline std::string to_string(SpreadModel m) { return m == SpreadModel::SI ? "SI" : "dSIR"; }

inline SpreadModel parse_spread_model(const std::string& s) {
  if (s == "SI" || s == "si") return SpreadModel::SI;
  if (s == "dSIR" || s == "dsir" || s == "DSIR") return SpreadModel::dSIR;
  throw std::invalid_argument("unknown spreading model '" + s + "'");
}

// Per-node transition times; -1 marks sources and T marks nodes that never
// leave the susceptible state.
struct Trajectory {
  std::vector<int> t;
  int T = 0;

  std::size_t size() const noexcept { return t.size(); }
  bool is_source(std::size_t i) const { return t[i] == -1; }

  std::vector<int> initial_state() const {
    std::vector<int> x0(t.size());
    for (std::size_t i = 0; i < t.size(); ++i) x0[i] = t[i] == -1 ? -1 : +1;
    return x0;
  }
};

// Node k is infectious at time s.
inline bool is_infectious(int t_k, int s, int delta) noexcept {
  return t_k < s && (delta >= kNoRecovery || s <= t_k + delta);
}

// Probability that a node still susceptible at time s gets infected at s.
inline double p_inf(int s, std::span<const int> neighbor_times, std::span<const double> neighbor_lambdas,
                    std::span<const int> neighbor_deltas) {
  double survive = 1.0;
  for (std::size_t k = 0; k < neighbor_times.size(); ++k)
    if (is_infectious(neighbor_times[k], s, neighbor_deltas[k])) survive *= 1.0 - neighbor_lambdas[k];
  return 1.0 - survive;
}

inline double p_inf(int s, std::span<const int> neighbor_times, std::span<const double> neighbor_lambdas,
                    const SpreadParams& params) {
  std::vector<int> deltas(neighbor_times.size(),
                          params.model == SpreadModel::SI ? kNoRecovery : params.delta_rec);
  return p_inf(s, neighbor_times, neighbor_lambdas, deltas);
}

// Transition-time factor of a node given its initial state (-1 source,
// +1 susceptible) and the transition times of its neighbors. Evaluated
// directly from the time-by-time product.
inline double node_factor(int t_i, int x0_i, std::span<const int> neighbor_times,
                          std::span<const double> neighbor_lambdas, std::span<const int> neighbor_deltas, int T) {
  if (x0_i == -1) return t_i == -1 ? 1.0 : 0.0;
  if (t_i < 0 || t_i > T) return 0.0;
  double value = 1.0;
  for (int s = 0; s < t_i; ++s) value *= 1.0 - p_inf(s, neighbor_times, neighbor_lambdas, neighbor_deltas);
  if (t_i < T) value *= p_inf(t_i, neighbor_times, neighbor_lambdas, neighbor_deltas);
  return value;
}

inline double node_factor(int t_i, int x0_i, std::span<const int> neighbor_times,
                          std::span<const double> neighbor_lambdas, const SpreadParams& params) {
  std::vector<int> deltas(neighbor_times.size(),
                          params.model == SpreadModel::SI ? kNoRecovery : params.delta_rec);
  return node_factor(t_i, x0_i, neighbor_times, neighbor_lambdas, deltas, params.T);
}

// Neighbor data of node i in the layout node_factor expects.
struct NeighborView {
  std::vector<std::size_t> nodes;
  std::vector<double> lambdas;  // neighbor -> i
  std::vector<int> deltas;
};

inline NeighborView neighbor_view(const SparseGraph& g, const SpreadParams& params, std::size_t i) {
  NeighborView v;
  for (const auto& a : g.arcs(i)) {
    v.nodes.push_back(a.neighbor);
    v.lambdas.push_back(g.lambda(g.directed_from(a.edge, a.neighbor), params.lambda));
    v.deltas.push_back(params.delta(a.neighbor));
  }
  return v;
}

struct EpidemicSample {
  Trajectory trajectory;
  bool truncated = false;  // t_max reached while the process could still evolve
};

// Discrete-time forward simulation. With `fixed_horizon` < 0 the horizon T is
// the first time at which the process cannot change any more: for dSIR no
// node is infectious, for SI no susceptible node has an infectious neighbor.
// Otherwise exactly `fixed_horizon` steps are simulated.
inline EpidemicSample sample_epidemic(const SparseGraph& g, std::span<const int> x0, const SpreadParams& params,
                                      std::uint64_t seed, int fixed_horizon = -1) {
  const std::size_t n = g.n_nodes();
  if (x0.size() != n) throw std::invalid_argument("initial state size mismatch");
  constexpr int unset = INT_MAX;
  std::vector<int> t(n, unset);
  for (std::size_t i = 0; i < n; ++i) {
    if (x0[i] != -1 && x0[i] != +1) throw std::invalid_argument("initial state must be -1 or +1");
    if (x0[i] == -1) t[i] = -1;
  }
  rng_t rng = make_rng(seed);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::vector<std::size_t> flipped;
  EpidemicSample out;

  int s = 0;
  for (;; ++s) {
    if (fixed_horizon >= 0) {
      if (s >= fixed_horizon) break;
    } else if (s >= params.t_max) {
      out.truncated = true;
      break;
    }
    bool any_infectious = false, any_exposed = false;
    flipped.clear();
    for (std::size_t i = 0; i < n; ++i) {
      if (t[i] != unset) {
        if (is_infectious(t[i], s, params.delta(i))) any_infectious = true;
        continue;
      }
      double survive = 1.0;
      for (const auto& a : g.arcs(i)) {
        const auto k = a.neighbor;
        if (t[k] != unset && is_infectious(t[k], s, params.delta(k)))
          survive *= 1.0 - g.lambda(g.directed_from(a.edge, k), params.lambda);
      }
      const double p = 1.0 - survive;
      if (p > 0.0) {
        any_exposed = true;
        if (unif(rng) < p) flipped.push_back(i);
      }
    }
    if (fixed_horizon < 0) {
      const bool finished = params.model == SpreadModel::SI ? !any_exposed : !any_infectious;
      if (finished) break;
    }
    for (auto i : flipped) t[i] = s;
  }
  out.trajectory.T = s;
  for (auto& ti : t)
    if (ti == unset) ti = s;
  out.trajectory.t = std::move(t);
  return out;
}

// "# T=<T> N=<N>" then "i t_i" per node.
inline void write_trajectory(std::ostream& os, const Trajectory& traj) {
  os << "# T=" << traj.T << " N=" << traj.size() << '\n';
  for (std::size_t i = 0; i < traj.size(); ++i) os << i << ' ' << traj.t[i] << '\n';
}

inline Trajectory read_trajectory(std::istream& is) {
  std::string header;
  std::getline(is, header);
  Trajectory traj;
  std::size_t n = 0;
  if (std::sscanf(header.c_str(), "# T=%d N=%zu", &traj.T, &n) != 2) throw std::runtime_error("trajectory: bad header");
  traj.t.assign(n, 0);
  for (std::size_t k = 0; k < n; ++k) {
    std::size_t i;
    int ti;
    if (!(is >> i >> ti) || i >= n) throw std::runtime_error("trajectory: bad line");
    traj.t[i] = ti;
  }
  return traj;
}

}  // namespace nss
