#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <optional>
#include <span>
#include <vector>

#include "nss/amp.hpp"
#include "nss/bp.hpp"
#include "nss/perceptron.hpp"

namespace nss {

// Bethe free entropy per node, split into its terms:
//   node        (1/N) sum_i log Z_i^nu
//   edge       -(1/N) sum_(ij) log sum m_{i->j} m_{j->i}
//   weight_prior (1/N) sum_a log int P(u) exp(-A u^2/2 + B_a u)
//   output      (1/N) sum_i log sum_x nu_i(x) eta_i(x)
//   ab_correction (1/N) sum_a [A (a_a^2 + v_a)/2 - B_a a_a]
//   omega_correction (1/N) sum_i (omega_i - F_i a)^2 / (2 V)
struct FreeEntropyReport {
  double node_term = 0.0;
  double edge_term = 0.0;
  double weight_prior_term = 0.0;
  double output_term = 0.0;
  double ab_correction = 0.0;
  double omega_correction = 0.0;
  double phi_rs = 0.0;
  bool contradiction = false;

  double sum_of_terms() const {
    return node_term + edge_term + weight_prior_term + output_term + ab_correction + omega_correction;
  }
};

// Spreading part: node and edge terms from the current BP messages. Fills
// `nu` when non-null.
inline void add_spreading_terms(FreeEntropyReport& r, BpEngine& bp, std::vector<NuEstimate>* nu = nullptr) {
  const auto& g = bp.graph();
  const double n = static_cast<double>(g.n_nodes());
  double node = 0.0, edge = 0.0;
  if (nu) nu->resize(g.n_nodes());
  for (std::size_t i = 0; i < g.n_nodes(); ++i) {
    auto est = bp.compute_nu(i);
    if (nu) (*nu)[i] = est;
    node += est.log_z;
  }
  for (std::size_t e = 0; e < g.n_edges(); ++e) edge += bp.edge_free_entropy(e);
  r.node_term = node / n;
  r.edge_term = -edge / n;
  if (!std::isfinite(r.node_term) || !std::isfinite(r.edge_term)) r.contradiction = true;
}

inline double output_entropy(std::span<const BinaryDistribution> nu, std::span<const BinaryDistribution> eta) {
  double s = 0.0;
  for (std::size_t i = 0; i < nu.size(); ++i) s += std::log(nu[i].plus * eta[i].plus + nu[i].minus * eta[i].minus);
  return s / static_cast<double>(nu.size());
}

// Perceptron part, with whichever variances the iteration used.
inline void add_glm_terms(FreeEntropyReport& r, const AmpState& amp, WeightPrior prior, std::size_t n_nodes) {
  const double n = static_cast<double>(n_nodes);
  double wp = 0.0, ab = 0.0, om = 0.0;
  for (std::size_t a = 0; a < amp.a.size(); ++a) {
    const double A = amp.weight_field(a);
    wp += log_partition_in(A, amp.B[a], prior);
    ab += 0.5 * A * (amp.a[a] * amp.a[a] + amp.v[a]) - amp.B[a] * amp.a[a];
  }
  for (std::size_t i = 0; i < amp.omega.size(); ++i) {
    const double d = amp.omega[i] - amp.fa[i];
    om += d * d / (2.0 * amp.node_variance(i));
  }
  r.weight_prior_term = wp / n;
  r.ab_correction = ab / n;
  r.omega_correction = om / n;
}

inline void finish(FreeEntropyReport& r) {
  r.phi_rs = r.sum_of_terms();
  if (!std::isfinite(r.phi_rs)) r.contradiction = true;
}

// Free entropy of the perfect-recovery fixed point for deterministic
// spreading: only the weight prior contributes.
inline double phi_info_closed_form(WeightPrior prior, double alpha) { return expected_log_prior(prior) / alpha; }

// One point of a sensor-density scan at fixed (alpha, lambda, kappa).
struct ScanPoint {
  double rho = 0.0;
  double overlap_random = 0.0;     // mean overlap, random init
  double overlap_informed = 0.0;   // mean overlap, informed init
  double phi_random = 0.0;
  double phi_informed = 0.0;
  double perfect_fraction = 0.0;   // fraction of random-init runs with overlap 1
};

struct Thresholds {
  std::optional<double> rho_c;   // spinodal: random init reaches perfect recovery
  std::optional<double> rho_it;  // phi_random crosses phi_info
  bool hard_phase() const { return rho_c && rho_it && *rho_it < *rho_c; }
};

inline bool reaches_perfect_recovery(const ScanPoint& p) { return p.perfect_fraction > 0.5; }

// rho_IT by linear interpolation of phi_random - phi_info between the grid
// points where it changes sign from positive to non-positive.
inline std::optional<double> locate_information_threshold(std::span<const ScanPoint> grid, double phi_info) {
  for (std::size_t k = 0; k + 1 < grid.size(); ++k) {
    const double d0 = grid[k].phi_random - phi_info, d1 = grid[k + 1].phi_random - phi_info;
    if (d0 > 0.0 && d1 <= 0.0) {
      const double f = d0 / (d0 - d1);
      return grid[k].rho + f * (grid[k + 1].rho - grid[k].rho);
    }
  }
  if (!grid.empty() && grid.front().phi_random - phi_info <= 0.0) return grid.front().rho;
  return std::nullopt;
}

// rho_c: first grid point with perfect recovery from random init, refined by
// bisection against the previous grid point down to `resolution`.
inline std::optional<double> locate_spinodal(std::span<const ScanPoint> grid,
                                             const std::function<ScanPoint(double)>& evaluate, double resolution) {
  std::size_t first = grid.size();
  for (std::size_t k = 0; k < grid.size(); ++k)
    if (reaches_perfect_recovery(grid[k])) {
      first = k;
      break;
    }
  if (first == grid.size()) return std::nullopt;
  if (first == 0 || !evaluate) return grid[first].rho;
  double lo = grid[first - 1].rho, hi = grid[first].rho;
  while (hi - lo > resolution) {
    const double mid = 0.5 * (lo + hi);
    if (reaches_perfect_recovery(evaluate(mid)))
      hi = mid;
    else
      lo = mid;
  }
  return hi;
}

inline Thresholds locate_thresholds(std::span<const ScanPoint> grid, double phi_info,
                                    const std::function<ScanPoint(double)>& evaluate = {},
                                    double resolution = 0.01) {
  Thresholds t;
  t.rho_c = locate_spinodal(grid, evaluate, resolution);
  t.rho_it = locate_information_threshold(grid, phi_info);
  return t;
}

}  // namespace nss
