#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "nss/amp.hpp"
#include "nss/bp.hpp"
#include "nss/common.hpp"
#include "nss/free_entropy.hpp"
#include "nss/graph.hpp"
#include "nss/observation.hpp"
#include "nss/perceptron.hpp"
#include "nss/spreading.hpp"

namespace nss {

enum class Algorithm { BpAmp, BpOnly, AmpOnly };

inline std::string to_string(Algorithm a) {
  switch (a) {
    case Algorithm::BpAmp: return "bp-amp";
    case Algorithm::BpOnly: return "bp-only";
    case Algorithm::AmpOnly: return "amp-only";
  }
  return "?";
}

inline Algorithm parse_algorithm(const std::string& s) {
  if (s == "bp-amp" || s == "bp_amp") return Algorithm::BpAmp;
  if (s == "bp-only" || s == "bp_only" || s == "bp") return Algorithm::BpOnly;
  if (s == "amp-only" || s == "amp_only" || s == "amp") return Algorithm::AmpOnly;
  throw std::invalid_argument("unknown algorithm '" + s + "'");
}

// Everything inference may look at. The teacher weights are only used for
// informed initialization.
struct InferenceProblem {
  const SparseGraph& graph;
  const SpreadParams& params;
  const ObservationSet& obs;
  const Covariates* F = nullptr;
  double kappa = 0.0;
  WeightPrior weights = WeightPrior::Gaussian;
  std::span<const double> teacher = {};
};

struct InferenceOptions {
  Algorithm algorithm = Algorithm::BpAmp;
  InitMode init = InitMode::Random;
  double damping = 0.5;  // BP messages
  double amp_damping = 0.0;
  double variance_floor = kAmpVarianceFloor;
  AmpVariance variance_mode = AmpVariance::Scalar;
  double tolerance = 1e-7;
  int max_iterations = 1000;
  int bp_sweeps_per_iteration = 1;
  std::uint64_t seed = 0;
};

struct RunResult {
  Algorithm algorithm = Algorithm::BpAmp;
  InitMode init = InitMode::Random;
  std::vector<BinaryDistribution> chi;  // posterior of x0 per node
  std::vector<BinaryDistribution> nu;   // spreading-side belief
  std::vector<BinaryDistribution> eta;  // prior-side field
  int K = 0;                            // T + 2; 0 when no time beliefs
  std::vector<double> time_beliefs;     // N x K, index t + 1
  std::vector<int> x_hat;
  std::vector<double> t_hat;
  std::vector<double> weight_means;
  FreeEntropyReport free_entropy;
  bool converged = false;
  int iterations = 0;
  double residual = 0.0;
  bool failed = false;
  std::string failure;

  std::span<const double> time_belief(std::size_t i) const {
    return {time_beliefs.data() + i * static_cast<std::size_t>(K), static_cast<std::size_t>(K)};
  }
};

// Argmax of chi per node, ties to +1.
inline std::vector<int> mmo_estimate(std::span<const BinaryDistribution> chi) {
  std::vector<int> x(chi.size());
  for (std::size_t i = 0; i < chi.size(); ++i) x[i] = chi[i].plus >= chi[i].minus ? +1 : -1;
  return x;
}

// Posterior mean of t_i from N x K beliefs over {-1..K-2}.
inline std::vector<double> mmse_times(std::span<const double> beliefs, int K) {
  const std::size_t n = K > 0 ? beliefs.size() / static_cast<std::size_t>(K) : 0;
  std::vector<double> t(n, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (int k = 0; k < K; ++k) t[i] += (k - 1) * beliefs[i * K + k];
  return t;
}

inline BinaryDistribution combine(const BinaryDistribution& eta, const BinaryDistribution& nu) {
  const double p = eta.plus * nu.plus, m = eta.minus * nu.minus;
  const double z = p + m;
  if (!(z > 0.0)) return {0.5, 0.5};
  return {p / z, m / z};
}

namespace detail {

inline void fail(RunResult& r, std::string why) {
  r.failed = true;
  r.converged = false;
  r.failure = std::move(why);
}

inline void collect_spreading(RunResult& r, BpEngine& bp, std::size_t n) {
  std::vector<NuEstimate> nu;
  add_spreading_terms(r.free_entropy, bp, &nu);
  r.nu.resize(n);
  for (std::size_t i = 0; i < n; ++i) r.nu[i] = nu[i].nu;
  r.K = bp.table_size();
  r.time_beliefs.resize(n * r.K);
  for (std::size_t i = 0; i < n; ++i) {
    auto b = bp.node_belief(i);
    std::copy(b.begin(), b.end(), r.time_beliefs.begin() + i * r.K);
  }
  r.t_hat = mmse_times(r.time_beliefs, r.K);
}

inline void finish_result(RunResult& r) {
  r.chi.resize(r.nu.size());
  for (std::size_t i = 0; i < r.nu.size(); ++i) r.chi[i] = combine(r.eta[i], r.nu[i]);
  r.x_hat = mmo_estimate(r.chi);
  r.free_entropy.output_term = output_entropy(r.nu, r.eta);
  finish(r.free_entropy);
  if (r.free_entropy.contradiction && !r.failed) fail(r, "zero partition function in free entropy");
}

// Field handed to BP, kept kBeliefClamp away from certainty like the belief
// entering g_out. A saturated field on the wrong side of an observation
// otherwise underflows every message through the node.
inline BinaryDistribution clamp_field(BinaryDistribution e) {
  e.plus = std::clamp(e.plus, kBeliefClamp, 1.0 - kBeliefClamp);
  e.minus = 1.0 - e.plus;
  return e;
}

inline void require_covariates(const InferenceProblem& p) {
  if (!p.F) throw std::invalid_argument("algorithm needs covariates");
  if (p.F->rows() != p.graph.n_nodes()) throw std::invalid_argument("covariate rows do not match graph size");
}

inline AmpState make_amp(const InferenceProblem& p, const InferenceOptions& o) {
  return init_amp(o.init, p.F->rows(), p.F->cols(), mix_seed(o.seed, 0xa3), p.teacher, o.variance_floor,
                  o.variance_mode);
}

}  // namespace detail

// BP with the separable prior: eta_i = (1 - delta(kappa), delta(kappa)).
inline RunResult run_bp_only(const InferenceProblem& p, const InferenceOptions& o) {
  const std::size_t n = p.graph.n_nodes();
  RunResult r;
  r.algorithm = Algorithm::BpOnly;
  r.init = o.init;
  const double d = source_density(p.kappa);
  r.eta.assign(n, BinaryDistribution{1.0 - d, d});

  BpEngine bp(p.graph, p.params, p.obs);
  bp.set_uniform_eta(r.eta.front());
  rng_t rng = make_rng(mix_seed(o.seed, 0xb9));
  for (int it = 1; it <= o.max_iterations; ++it) {
    auto s = bp.sweep(rng, o.damping);
    r.iterations = it;
    if (s.contradiction) {
      detail::fail(r, "contradiction on directed edge " + std::to_string(s.failed_edge));
      break;
    }
    r.residual = s.delta;
    if (s.delta < o.tolerance) {
      r.converged = true;
      break;
    }
  }
  if (!r.failed) detail::collect_spreading(r, bp, n);
  else r.nu.assign(n, BinaryDistribution{});
  detail::finish_result(r);
  return r;
}

// AMP on the perceptron alone with nu pinned by whatever the observations
// say about x0, uniform elsewhere.
inline RunResult run_amp_only(const InferenceProblem& p, const InferenceOptions& o) {
  detail::require_covariates(p);
  const std::size_t n = p.graph.n_nodes();
  RunResult r;
  r.algorithm = Algorithm::AmpOnly;
  r.init = o.init;
  r.nu.resize(n);
  std::vector<double> nu_plus(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto x = p.obs.known_x0(i);
    r.nu[i] = !x ? BinaryDistribution{} : *x == 1 ? BinaryDistribution{1.0, 0.0} : BinaryDistribution{0.0, 1.0};
    nu_plus[i] = r.nu[i].plus;
  }
  r.eta.resize(n);
  AmpState amp = detail::make_amp(p, o);
  for (int it = 1; it <= o.max_iterations; ++it) {
    amp_forward(amp, *p.F, nu_plus, p.kappa, r.eta);
    const double change = amp_backward(amp, *p.F, p.weights, o.amp_damping);
    r.iterations = it;
    r.residual = change;
    if (!std::isfinite(change)) {
      detail::fail(r, "non-finite AMP update");
      break;
    }
    if (change < o.tolerance) {
      r.converged = true;
      break;
    }
  }
  add_glm_terms(r.free_entropy, amp, p.weights, n);
  r.weight_means = amp.a;
  detail::finish_result(r);
  return r;
}

// Hybrid iteration: nu from BP, AMP forward, AMP backward, then damped BP
// sweeps with the new eta, until both halves stop moving.
inline RunResult run_bp_amp(const InferenceProblem& p, const InferenceOptions& o) {
  detail::require_covariates(p);
  const std::size_t n = p.graph.n_nodes();
  RunResult r;
  r.algorithm = Algorithm::BpAmp;
  r.init = o.init;
  r.eta.assign(n, BinaryDistribution{});
  std::vector<double> nu_plus(n);

  BpEngine bp(p.graph, p.params, p.obs);
  AmpState amp = detail::make_amp(p, o);
  rng_t rng = make_rng(mix_seed(o.seed, 0xb9));
  for (int it = 1; it <= o.max_iterations && !r.failed; ++it) {
    r.iterations = it;
    for (std::size_t i = 0; i < n; ++i) {
      const auto est = bp.compute_nu(i);
      if (!std::isfinite(est.log_z)) {
        detail::fail(r, "contradiction at node " + std::to_string(i));
        break;
      }
      nu_plus[i] = est.nu.plus;
    }
    if (r.failed) break;
    amp_forward(amp, *p.F, nu_plus, p.kappa, r.eta);
    const double change = amp_backward(amp, *p.F, p.weights, o.amp_damping);
    if (!std::isfinite(change)) {
      detail::fail(r, "non-finite AMP update");
      break;
    }
    for (auto& e : r.eta) e = detail::clamp_field(e);
    bp.set_eta(r.eta);
    double delta = 0.0;
    for (int k = 0; k < o.bp_sweeps_per_iteration; ++k) {
      const auto s = bp.sweep(rng, o.damping);
      if (s.contradiction) {
        detail::fail(r, "contradiction on directed edge " + std::to_string(s.failed_edge));
        break;
      }
      delta = std::max(delta, s.delta);
    }
    r.residual = std::max(delta, change);
    if (!r.failed && r.residual < o.tolerance) r.converged = true;
    if (r.converged) break;
  }
  if (!r.failed) {
    detail::collect_spreading(r, bp, n);
    add_glm_terms(r.free_entropy, amp, p.weights, n);
  } else {
    r.nu.assign(n, BinaryDistribution{});
  }
  r.weight_means = amp.a;
  detail::finish_result(r);
  return r;
}

inline RunResult run_inference(const InferenceProblem& p, const InferenceOptions& o) {
  switch (o.algorithm) {
    case Algorithm::BpAmp: return run_bp_amp(p, o);
    case Algorithm::BpOnly: return run_bp_only(p, o);
    case Algorithm::AmpOnly: return run_amp_only(p, o);
  }
  throw std::invalid_argument("unknown algorithm");
}

}  // namespace nss
