#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "nss/common.hpp"
#include "nss/perceptron.hpp"

namespace nss {

enum class InitMode { Random, Informed };

inline std::string to_string(InitMode m) { return m == InitMode::Random ? "random" : "informed"; }

inline InitMode parse_init_mode(const std::string& s) {
  if (s == "random") return InitMode::Random;
  if (s == "informed") return InitMode::Informed;
  throw std::invalid_argument("unknown init mode '" + s + "'");
}

// Lower bound on V during the iteration. Much below ~1/N^2 no node
// preactivation lies within sqrt(V) of the threshold, every g_out underflows,
// A drops to 0 and a perfect-recovery state falls back to a = 0. The free
// entropy of a perfect-recovery state is off by O(sqrt(V)), so the floor
// sits as low as desk-scale N tolerates.
inline constexpr double kAmpVarianceFloor = 1e-7;

// Scalar: V and A averaged over indices. PerIndex: V_i = sum_a F_ia^2 v_a
// and A_a = sum_i F_ia^2 g_i^2, which matters when N and M are tiny.
enum class AmpVariance { Scalar, PerIndex };

inline std::string to_string(AmpVariance m) { return m == AmpVariance::Scalar ? "scalar" : "per-index"; }

inline AmpVariance parse_amp_variance(const std::string& s) {
  if (s == "scalar") return AmpVariance::Scalar;
  if (s == "per-index" || s == "per_index") return AmpVariance::PerIndex;
  throw std::invalid_argument("unknown variance mode '" + s + "'");
}

// AMP variables of the perceptron side. a, v, B live on weights (size M);
// omega, g_out, fa on nodes (size N). V and A are the index-averaged
// variances; in per-index mode Vi (size N) and Aa (size M) hold the
// per-index ones.
struct AmpState {
  std::vector<double> a, v, B;
  std::vector<double> omega, g_out, fa;
  double V = 1.0;
  double A = 0.0;
  double variance_floor = kAmpVarianceFloor;
  AmpVariance mode = AmpVariance::Scalar;
  std::vector<double> Vi, Aa;

  double node_variance(std::size_t i) const { return mode == AmpVariance::Scalar ? V : Vi[i]; }
  double weight_field(std::size_t a) const { return mode == AmpVariance::Scalar ? A : Aa[a]; }
};

inline AmpState init_amp(InitMode mode, std::size_t n, std::size_t m, std::uint64_t seed,
                         std::span<const double> teacher = {}, double variance_floor = kAmpVarianceFloor,
                         AmpVariance variance_mode = AmpVariance::Scalar) {
  AmpState s;
  s.variance_floor = variance_floor;
  s.mode = variance_mode;
  if (s.mode == AmpVariance::PerIndex) {
    s.Vi.assign(n, 1.0);
    s.Aa.assign(m, 0.0);
  }
  s.g_out.assign(n, 0.0);
  s.omega.assign(n, 0.0);
  s.fa.assign(n, 0.0);
  s.B.assign(m, 0.0);
  const double nn = static_cast<double>(n);
  if (mode == InitMode::Random) {
    rng_t rng = make_rng(seed);
    std::normal_distribution<double> gauss(0.0, 1.0 / std::sqrt(nn));
    s.a.resize(m);
    for (double& x : s.a) x = gauss(rng);
    s.v.assign(m, 1.0);
  } else {
    if (teacher.size() != m) throw std::invalid_argument("informed init needs the teacher weights");
    s.a.assign(teacher.begin(), teacher.end());
    s.v.assign(m, 1.0 / std::sqrt(nn));
  }
  s.V = std::max(mean(s.v), s.variance_floor);
  return s;
}

// V, omega (Onsager-corrected), g_out with the BP belief nu_plus, and the
// field eta passed back to BP.
inline void amp_forward(AmpState& s, const Covariates& F, std::span<const double> nu_plus, double kappa,
                        std::span<BinaryDistribution> eta) {
  s.V = std::max(mean(s.v), s.variance_floor);
  F.multiply(s.a, s.fa);
  if (s.mode == AmpVariance::PerIndex) {
    F.multiply_squared(s.v, s.Vi);
    for (double& x : s.Vi) x = std::max(x, s.variance_floor);
  }
  for (std::size_t i = 0; i < F.rows(); ++i) {
    const double V = s.node_variance(i);
    s.omega[i] = s.fa[i] - V * s.g_out[i];
    s.g_out[i] = g_out(s.omega[i], nu_plus[i], V, kappa);
    eta[i] = eta_field(s.omega[i], V, kappa);
  }
}

// A, B and the new weight estimates; returns max |a_new - a_old|. Damping
// also applies to A, which near the variance floor is carried by the few
// nodes inside the sqrt(V) window and jumps from one iteration to the next.
inline double amp_backward(AmpState& s, const Covariates& F, WeightPrior prior, double damping = 0.0) {
  const double m = static_cast<double>(F.cols());
  double sq = 0.0;
  for (double g : s.g_out) sq += g * g;
  s.A = (1.0 - damping) * sq / m + damping * s.A;
  F.multiply_transposed(s.g_out, s.B);
  if (s.mode == AmpVariance::PerIndex) {
    std::vector<double> g2(s.g_out.size()), Aa(s.Aa.size());
    for (std::size_t i = 0; i < g2.size(); ++i) g2[i] = s.g_out[i] * s.g_out[i];
    F.multiply_transposed_squared(g2, Aa);
    for (std::size_t a = 0; a < Aa.size(); ++a) s.Aa[a] = (1.0 - damping) * Aa[a] + damping * s.Aa[a];
  }
  double change = 0.0;
  for (std::size_t a = 0; a < F.cols(); ++a) {
    const double A = s.weight_field(a);
    s.B[a] += s.a[a] * A;
    const auto est = f_in(A, s.B[a], prior);
    const double na = (1.0 - damping) * est.mean + damping * s.a[a];
    const double nv = (1.0 - damping) * est.variance + damping * s.v[a];
    change = std::max(change, std::abs(na - s.a[a]));
    s.a[a] = na;
    s.v[a] = nv;
  }
  return change;
}

}  // namespace nss
