#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include "nss/common.hpp"
#include "nss/graph.hpp"
#include "nss/observation.hpp"
#include "nss/perceptron.hpp"
#include "nss/spreading.hpp"

namespace nss {

inline constexpr std::size_t kOracleMaxNodes = 10;
inline constexpr int kOracleMaxHorizon = 4;
inline constexpr std::size_t kOracleMaxWeights = 12;
inline constexpr std::size_t kOracleMaxConfigs = std::size_t{1} << 22;

struct ExactPosterior {
  int K = 0;
  std::vector<double> time_marginals;  // N x K, index t + 1
  std::vector<BinaryDistribution> x0_marginals;
  std::vector<double> weight_means;  // Rademacher prior only
  double log_z = -kInf;
  bool contradiction = true;

  std::span<const double> time_marginal(std::size_t i) const {
    return {time_marginals.data() + i * static_cast<std::size_t>(K), static_cast<std::size_t>(K)};
  }
};

// Prior on x0: either independent per-node fields or the sign perceptron
// with Rademacher weights enumerated exactly.
struct OraclePrior {
  std::vector<BinaryDistribution> separable;
  const Covariates* F = nullptr;
  double kappa = 0.0;

  static OraclePrior independent(std::size_t n, BinaryDistribution eta) {
    OraclePrior p;
    p.separable.assign(n, eta);
    return p;
  }
  static OraclePrior perceptron(const Covariates& F, double kappa) {
    OraclePrior p;
    p.F = &F;
    p.kappa = kappa;
    return p;
  }
};

namespace detail {

// Source mask of x0 = sign(F u - kappa) for every u in {-1,+1}^M, where bit
// a of the index sets u_a = +1.
inline std::vector<std::uint32_t> perceptron_masks(const Covariates& F, double kappa) {
  const std::size_t m = F.cols(), n = F.rows();
  std::vector<std::uint32_t> masks(std::size_t{1} << m);
  std::vector<double> u(m);
  for (std::size_t code = 0; code < masks.size(); ++code) {
    for (std::size_t a = 0; a < m; ++a) u[a] = (code >> a) & 1 ? 1.0 : -1.0;
    std::uint32_t mask = 0;
    for (std::size_t i = 0; i < n; ++i) {
      double z = 0.0;
      for (std::size_t a = 0; a < m; ++a) z += F(i, a) * u[a];
      if (z - kappa < 0.0) mask |= std::uint32_t{1} << i;
    }
    masks[code] = mask;
  }
  return masks;
}

}  // namespace detail

// Exact posterior over transition times and initial states of a small
// instance. One pass over all (T+2)^N time configurations accumulates, per
// source mask, the spreading weight and the per-node time histograms; the
// prior on masks is then applied separately.
inline ExactPosterior enumerate_posterior(const SparseGraph& g, const SpreadParams& params, const ObservationSet& obs,
                                          const OraclePrior& prior) {
  const std::size_t n = g.n_nodes();
  const int T = params.T, K = T + 2;
  if (n == 0 || n > kOracleMaxNodes) throw std::invalid_argument("oracle: node count outside bounds");
  if (T > kOracleMaxHorizon) throw std::invalid_argument("oracle: horizon too large");
  std::size_t configs = 1;
  for (std::size_t i = 0; i < n; ++i) configs *= static_cast<std::size_t>(K);
  if (configs > kOracleMaxConfigs) throw std::invalid_argument("oracle: too many configurations");
  if (prior.F) {
    if (prior.F->rows() != n) throw std::invalid_argument("oracle: covariate rows do not match graph");
    if (prior.F->cols() > kOracleMaxWeights) throw std::invalid_argument("oracle: too many weights");
  } else if (prior.separable.size() != n) {
    throw std::invalid_argument("oracle: separable prior size mismatch");
  }

  std::vector<NeighborView> views(n);
  for (std::size_t i = 0; i < n; ++i) views[i] = neighbor_view(g, params, i);

  const std::size_t n_masks = std::size_t{1} << n;
  std::vector<double> mass(n_masks, 0.0);
  std::vector<double> hist(n_masks * n * K, 0.0);
  std::vector<int> t(n, -1), nt;
  for (std::size_t code = 0; code < configs; ++code) {
    std::size_t c = code;
    std::uint32_t mask = 0;
    for (std::size_t i = 0; i < n; ++i) {
      t[i] = static_cast<int>(c % K) - 1;
      c /= K;
      if (t[i] == -1) mask |= std::uint32_t{1} << i;
    }
    double w = 1.0;
    for (std::size_t i = 0; i < n && w > 0.0; ++i) {
      w *= obs_likelihood(obs, i, t[i]);
      if (w == 0.0 || t[i] == -1) continue;
      nt.resize(views[i].nodes.size());
      for (std::size_t k = 0; k < nt.size(); ++k) nt[k] = t[views[i].nodes[k]];
      w *= node_factor(t[i], +1, nt, views[i].lambdas, views[i].deltas, T);
    }
    if (w == 0.0) continue;
    mass[mask] += w;
    double* h = hist.data() + mask * n * K;
    for (std::size_t i = 0; i < n; ++i) h[i * K + t[i] + 1] += w;
  }

  // prior weight of each source mask
  std::vector<double> pmask(n_masks, 0.0);
  std::vector<std::uint32_t> umasks;
  if (prior.F) {
    umasks = detail::perceptron_masks(*prior.F, prior.kappa);
    const double pu = std::ldexp(1.0, -static_cast<int>(prior.F->cols()));
    for (auto mk : umasks) pmask[mk] += pu;
  } else {
    for (std::size_t mk = 0; mk < n_masks; ++mk) {
      double p = 1.0;
      for (std::size_t i = 0; i < n; ++i) p *= (mk >> i) & 1 ? prior.separable[i].minus : prior.separable[i].plus;
      pmask[mk] = p;
    }
  }

  ExactPosterior out;
  out.K = K;
  out.time_marginals.assign(n * K, 0.0);
  out.x0_marginals.assign(n, BinaryDistribution{0.0, 0.0});
  double z = 0.0;
  for (std::size_t mk = 0; mk < n_masks; ++mk) {
    const double p = pmask[mk];
    if (p == 0.0 || mass[mk] == 0.0) continue;
    z += p * mass[mk];
    const double* h = hist.data() + mk * n * K;
    for (std::size_t k = 0; k < n * K; ++k) out.time_marginals[k] += p * h[k];
  }
  if (!(z > 0.0)) return out;
  out.contradiction = false;
  out.log_z = std::log(z);
  for (double& x : out.time_marginals) x /= z;
  for (std::size_t i = 0; i < n; ++i) {
    out.x0_marginals[i].minus = out.time_marginals[i * K];
    out.x0_marginals[i].plus = 1.0 - out.time_marginals[i * K];
  }
  if (prior.F) {
    const std::size_t m = prior.F->cols();
    const double pu = std::ldexp(1.0, -static_cast<int>(m));
    out.weight_means.assign(m, 0.0);
    for (std::size_t code = 0; code < umasks.size(); ++code) {
      const double w = pu * mass[umasks[code]] / z;
      for (std::size_t a = 0; a < m; ++a) out.weight_means[a] += (code >> a) & 1 ? w : -w;
    }
  }
  return out;
}

// Posterior over Rademacher weights given x0 pinned on a subset of nodes.
inline ExactPosterior enumerate_perceptron_only(const Covariates& F, double kappa,
                                                std::span<const std::optional<int>> pinned) {
  const std::size_t n = F.rows(), m = F.cols();
  if (m > kOracleMaxWeights + 8) throw std::invalid_argument("oracle: too many weights");
  if (pinned.size() != n) throw std::invalid_argument("oracle: pin vector size mismatch");
  ExactPosterior out;
  out.weight_means.assign(m, 0.0);
  out.x0_marginals.assign(n, BinaryDistribution{0.0, 0.0});
  std::vector<double> u(m), z(n);
  double count = 0.0;
  for (std::size_t code = 0; code < (std::size_t{1} << m); ++code) {
    for (std::size_t a = 0; a < m; ++a) u[a] = (code >> a) & 1 ? 1.0 : -1.0;
    F.multiply(u, z);
    bool ok = true;
    for (std::size_t i = 0; i < n && ok; ++i) {
      const int x = z[i] - kappa >= 0.0 ? +1 : -1;
      if (pinned[i] && *pinned[i] != x) ok = false;
    }
    if (!ok) continue;
    count += 1.0;
    for (std::size_t a = 0; a < m; ++a) out.weight_means[a] += u[a];
    for (std::size_t i = 0; i < n; ++i) (z[i] - kappa >= 0.0 ? out.x0_marginals[i].plus : out.x0_marginals[i].minus) += 1.0;
  }
  if (count == 0.0) return out;
  out.contradiction = false;
  out.log_z = std::log(count) - static_cast<double>(m) * std::log(2.0);
  for (double& x : out.weight_means) x /= count;
  for (auto& b : out.x0_marginals) {
    b.plus /= count;
    b.minus /= count;
  }
  return out;
}

}  // namespace nss
