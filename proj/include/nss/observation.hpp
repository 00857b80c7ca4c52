#pragma once

#include <algorithm>
#include <cstddef>
#include <istream>
#include <numeric>
#include <optional>
#include <ostream>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "nss/common.hpp"
#include "nss/spreading.hpp"

namespace nss {

enum class ObservationKind { None, Sensors, Snapshot };
enum class Compartment { S, I, R };

inline std::string to_string(ObservationKind k) {
  switch (k) {
    case ObservationKind::None: return "none";
    case ObservationKind::Sensors: return "sensors";
    case ObservationKind::Snapshot: return "snapshot";
  }
  return "?";
}

inline ObservationKind parse_observation_kind(const std::string& s) {
  if (s == "none") return ObservationKind::None;
  if (s == "sensors") return ObservationKind::Sensors;
  if (s == "snapshot") return ObservationKind::Snapshot;
  throw std::invalid_argument("unknown observation kind '" + s + "'");
}

inline char compartment_char(Compartment c) { return c == Compartment::S ? 'S' : c == Compartment::I ? 'I' : 'R'; }

// Compartment at time t_obs of a node with transition time t and infectious
// period delta.
inline Compartment compartment_at(int t, int t_obs, int delta) {
  if (t >= t_obs) return Compartment::S;
  if (delta >= kNoRecovery || t_obs <= t + delta) return Compartment::I;
  return Compartment::R;
}

// Node-wise noiseless observations. Sensors pin t_i on a subset of nodes; a
// snapshot records every compartment at t_obs. `revealed_x0` optionally adds
// the initial state of every node on top of either kind.
struct ObservationSet {
  ObservationKind kind = ObservationKind::None;
  std::size_t n_nodes = 0;
  std::vector<std::optional<int>> sensor_t;  // Sensors
  int t_obs = 0;                              // Snapshot
  std::vector<Compartment> state;             // Snapshot
  std::vector<int> node_delta;                // Snapshot, infectious period per node
  std::vector<int> revealed_x0;

  static ObservationSet none(std::size_t n) {
    ObservationSet o;
    o.n_nodes = n;
    return o;
  }

  std::size_t n_sensors() const {
    return static_cast<std::size_t>(std::count_if(sensor_t.begin(), sensor_t.end(), [](auto& v) { return v.has_value(); }));
  }

  bool is_observed(std::size_t i) const {
    return kind == ObservationKind::Sensors && sensor_t[i].has_value();
  }

  // Initial state implied by an observation on node i, if any: a sensor
  // pins it through t_i, a revealed state pins it directly.
  std::optional<int> known_x0(std::size_t i) const {
    if (!revealed_x0.empty()) return revealed_x0[i];
    if (is_observed(i)) return *sensor_t[i] == -1 ? -1 : +1;
    return std::nullopt;
  }
};

// Uniformly random round-half-even(rho N) nodes observe their transition
// time. Sets drawn with the same seed are nested in rho.
inline ObservationSet make_sensors(const Trajectory& truth, double rho, std::uint64_t seed) {
  if (!(rho >= 0.0 && rho <= 1.0)) throw std::invalid_argument("sensor fraction outside [0,1]");
  const std::size_t n = truth.size();
  ObservationSet o;
  o.kind = ObservationKind::Sensors;
  o.n_nodes = n;
  o.sensor_t.assign(n, std::nullopt);
  const auto count = static_cast<std::size_t>(round_half_even(rho * static_cast<double>(n)));
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  rng_t rng = make_rng(seed);
  std::shuffle(order.begin(), order.end(), rng);
  for (std::size_t k = 0; k < std::min(count, n); ++k) o.sensor_t[order[k]] = truth.t[order[k]];
  return o;
}

inline ObservationSet make_snapshot(const Trajectory& truth, int t_obs, const SpreadParams& params) {
  const std::size_t n = truth.size();
  ObservationSet o;
  o.kind = ObservationKind::Snapshot;
  o.n_nodes = n;
  o.t_obs = t_obs;
  o.state.resize(n);
  o.node_delta.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    o.node_delta[i] = params.delta(i);
    o.state[i] = compartment_at(truth.t[i], t_obs, o.node_delta[i]);
  }
  return o;
}

// P(O_i | t_i) in {0, 1}.
inline double obs_likelihood(const ObservationSet& obs, std::size_t i, int t_i) {
  if (!obs.revealed_x0.empty() && (obs.revealed_x0[i] == -1) != (t_i == -1)) return 0.0;
  switch (obs.kind) {
    case ObservationKind::None: return 1.0;
    case ObservationKind::Sensors: return !obs.sensor_t[i] || *obs.sensor_t[i] == t_i ? 1.0 : 0.0;
    case ObservationKind::Snapshot:
      return compartment_at(t_i, obs.t_obs, obs.node_delta[i]) == obs.state[i] ? 1.0 : 0.0;
  }
  return 1.0;
}

// "<kind> N [t_obs]" then "node value" lines: sensor times, or S/I/R.
inline void write_observations(std::ostream& os, const ObservationSet& obs) {
  os << to_string(obs.kind) << ' ' << obs.n_nodes;
  if (obs.kind == ObservationKind::Snapshot) os << ' ' << obs.t_obs;
  os << '\n';
  for (std::size_t i = 0; i < obs.n_nodes; ++i) {
    if (obs.kind == ObservationKind::Sensors && obs.sensor_t[i]) os << i << ' ' << *obs.sensor_t[i] << '\n';
    if (obs.kind == ObservationKind::Snapshot) os << i << ' ' << compartment_char(obs.state[i]) << '\n';
  }
}

inline ObservationSet read_observations(std::istream& is, const SpreadParams& params) {
  std::string kind;
  std::size_t n = 0;
  if (!(is >> kind >> n)) throw std::runtime_error("observations: bad header");
  ObservationSet o;
  o.kind = parse_observation_kind(kind);
  o.n_nodes = n;
  if (o.kind == ObservationKind::Sensors) {
    o.sensor_t.assign(n, std::nullopt);
    std::size_t i;
    int t;
    while (is >> i >> t) {
      if (i >= n) throw std::runtime_error("observations: node out of range");
      o.sensor_t[i] = t;
    }
  } else if (o.kind == ObservationKind::Snapshot) {
    if (!(is >> o.t_obs)) throw std::runtime_error("observations: missing t_obs");
    o.state.assign(n, Compartment::S);
    o.node_delta.resize(n);
    for (std::size_t i = 0; i < n; ++i) o.node_delta[i] = params.delta(i);
    std::size_t i;
    char c;
    while (is >> i >> c) {
      if (i >= n) throw std::runtime_error("observations: node out of range");
      if (c != 'S' && c != 'I' && c != 'R') throw std::runtime_error("observations: bad compartment");
      o.state[i] = c == 'S' ? Compartment::S : c == 'I' ? Compartment::I : Compartment::R;
    }
  }
  return o;
}

}  // namespace nss
