#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <ostream>
#include <random>
#include <string>
#include <vector>

#include "json.hpp"
#include "nss/exact_oracle.hpp"
#include "nss/graph.hpp"
#include "nss/inference.hpp"
#include "nss/metrics.hpp"
#include "nss/observation.hpp"
#include "nss/perceptron.hpp"
#include "nss/spreading.hpp"

namespace nss {

// A small instance on a random tree with a horizon short enough for the
// exact oracle.
struct TreeInstance {
  SparseGraph graph;
  SpreadParams params;
  std::vector<int> x0;
  Trajectory truth;
  ObservationSet obs;
  Covariates F;  // only for perceptron instances
  std::vector<double> u;
};

// Largest horizon in [1, max_T] keeping (T+2)^N under the budget.
inline int tree_horizon(std::size_t n, int max_T, std::size_t budget = std::size_t{1} << 20) {
  int T = 1;
  for (int cand = 1; cand <= max_T; ++cand) {
    double c = std::pow(cand + 2.0, static_cast<double>(n));
    if (c <= static_cast<double>(budget)) T = cand;
  }
  return T;
}

// Sources drawn from the separable prior with source probability
// source_density(kappa); or, when m > 0, from a Rademacher perceptron.
inline TreeInstance make_tree_instance(std::size_t n, int T, double lambda, double rho, double kappa,
                                       std::uint64_t seed, std::size_t m = 0, SpreadModel model = SpreadModel::SI) {
  TreeInstance inst;
  inst.graph = generate_random_tree(n, mix_seed(seed, 1));
  inst.params.model = model;
  inst.params.lambda = lambda;
  inst.params.T = T;
  if (m > 0) {
    auto prior = make_perceptron_prior(n, m, kappa, WeightPrior::Rademacher, mix_seed(seed, 2));
    inst.x0 = sample_sources(prior);
    inst.F = std::move(prior.F);
    inst.u = std::move(prior.u);
  } else {
    rng_t rng = make_rng(mix_seed(seed, 2));
    std::bernoulli_distribution src(source_density(kappa));
    inst.x0.resize(n);
    for (auto& x : inst.x0) x = src(rng) ? -1 : +1;
  }
  inst.truth = sample_epidemic(inst.graph, inst.x0, inst.params, mix_seed(seed, 3), T).trajectory;
  inst.obs = make_sensors(inst.truth, rho, mix_seed(seed, 4));
  return inst;
}

inline InferenceOptions exact_bp_options() {
  InferenceOptions o;
  o.algorithm = Algorithm::BpOnly;
  o.damping = 0.0;
  o.tolerance = 1e-14;
  o.max_iterations = 200;
  return o;
}

struct TreeComparison {
  double time_marginal_error = 0.0;  // max abs over nodes and times
  double x0_marginal_error = 0.0;
  double phi_error = 0.0;
  bool converged = false;
};

inline TreeComparison compare_bp_only_with_oracle(const TreeInstance& inst, double kappa) {
  const double d = source_density(kappa);
  InferenceProblem p{inst.graph, inst.params, inst.obs, nullptr, kappa};
  const auto r = run_bp_only(p, exact_bp_options());
  const auto ex = enumerate_posterior(inst.graph, inst.params, inst.obs,
                                      OraclePrior::independent(inst.graph.n_nodes(), {1.0 - d, d}));
  TreeComparison c;
  c.converged = r.converged;
  if (r.failed || ex.contradiction) {
    c.time_marginal_error = c.x0_marginal_error = c.phi_error = kInf;
    return c;
  }
  for (std::size_t k = 0; k < ex.time_marginals.size(); ++k)
    c.time_marginal_error = std::max(c.time_marginal_error, std::abs(ex.time_marginals[k] - r.time_beliefs[k]));
  for (std::size_t i = 0; i < r.chi.size(); ++i)
    c.x0_marginal_error = std::max(c.x0_marginal_error, std::abs(ex.x0_marginals[i].plus - r.chi[i].plus));
  c.phi_error = std::abs(r.free_entropy.phi_rs - ex.log_z / static_cast<double>(inst.graph.n_nodes()));
  return c;
}

struct ValidationCheck {
  std::string name;
  bool pass = false;
  double value = 0.0;
  double tolerance = 0.0;
  std::string detail;
};

struct ValidationSpec {
  std::size_t tree_instances = 50;
  std::size_t min_nodes = 3, max_nodes = 10;
  int max_horizon = 4;
  std::vector<double> lambdas{0.4, 0.7, 1.0};
  std::vector<double> rhos{0.0, 0.3, 1.0};
  double kappa = -1.0;
  std::size_t hybrid_instances = 20;  // Rademacher perceptron on trees
  std::size_t hybrid_weights = 10;
  AmpVariance hybrid_variance = AmpVariance::Scalar;
  std::size_t control_instances = 400;
  double control_lambda = 0.3;
  double control_lambda_inference = 0.9;
  double control_rho = 0.3;
  std::uint64_t seed = 1;
};

inline ValidationSpec validation_spec_from_json(const nlohmann::json& j) {
  ValidationSpec s;
  s.tree_instances = j.value("tree_instances", s.tree_instances);
  s.min_nodes = j.value("min_nodes", s.min_nodes);
  s.max_nodes = std::min(j.value("max_nodes", s.max_nodes), kOracleMaxNodes);
  s.max_horizon = std::min(j.value("max_horizon", s.max_horizon), kOracleMaxHorizon);
  s.lambdas = j.value("lambdas", s.lambdas);
  s.rhos = j.value("rhos", s.rhos);
  s.kappa = j.value("kappa", s.kappa);
  s.hybrid_instances = j.value("hybrid_instances", s.hybrid_instances);
  s.hybrid_weights = std::min(j.value("hybrid_weights", s.hybrid_weights), kOracleMaxWeights);
  if (j.contains("hybrid_variance")) s.hybrid_variance = parse_amp_variance(j.at("hybrid_variance").get<std::string>());
  s.control_instances = j.value("control_instances", s.control_instances);
  s.control_lambda = j.value("control_lambda", s.control_lambda);
  s.control_lambda_inference = j.value("control_lambda_inference", s.control_lambda_inference);
  s.control_rho = j.value("control_rho", s.control_rho);
  s.seed = j.value("seed", s.seed);
  if (s.min_nodes < 2 || s.min_nodes > s.max_nodes) throw std::invalid_argument("bad node range");
  return s;
}

// Instance k of the tree suite: sizes, lambda and rho cycle deterministically.
inline TreeInstance tree_suite_instance(const ValidationSpec& s, std::size_t k, double* lambda = nullptr,
                                        double* rho = nullptr) {
  rng_t rng = make_rng(mix_seed(s.seed, k));
  std::uniform_int_distribution<std::size_t> size(s.min_nodes, s.max_nodes);
  const std::size_t n = size(rng);
  const int T = std::uniform_int_distribution<int>(1, tree_horizon(n, s.max_horizon))(rng);
  const double lam = s.lambdas[k % s.lambdas.size()];
  const double r = s.rhos[(k / s.lambdas.size()) % s.rhos.size()];
  if (lambda) *lambda = lam;
  if (rho) *rho = r;
  return make_tree_instance(n, T, lam, r, s.kappa, mix_seed(s.seed, 1000 + k));
}

// Nishimori control on trees, where BP-only is exact: O - MO over many
// instances, inferring with `lambda_inference`.
inline SampleStats tree_nishimori_gap(const ValidationSpec& s, double lambda_inference, std::uint64_t salt) {
  std::vector<double> o, mo;
  for (std::size_t k = 0; k < s.control_instances; ++k) {
    auto inst = make_tree_instance(s.max_nodes, 3, s.control_lambda, s.control_rho, s.kappa,
                                   mix_seed(s.seed ^ salt, k));
    SpreadParams inf = inst.params;
    inf.lambda = lambda_inference;
    InferenceProblem p{inst.graph, inf, inst.obs, nullptr, s.kappa};
    const auto r = run_bp_only(p, exact_bp_options());
    if (r.failed) continue;
    o.push_back(overlap(r.x_hat, inst.truth.initial_state()));
    mo.push_back(mean_overlap_from_marginals(r.chi));
  }
  return nishimori_gap(o, mo);
}

inline std::vector<ValidationCheck> run_validation(const ValidationSpec& s) {
  std::vector<ValidationCheck> checks;
  double worst_t = 0, worst_x = 0, worst_phi = 0;
  std::size_t not_converged = 0;
  for (std::size_t k = 0; k < s.tree_instances; ++k) {
    const auto c = compare_bp_only_with_oracle(tree_suite_instance(s, k), s.kappa);
    worst_t = std::max(worst_t, c.time_marginal_error);
    worst_x = std::max(worst_x, c.x0_marginal_error);
    worst_phi = std::max(worst_phi, c.phi_error);
    not_converged += c.converged ? 0 : 1;
  }
  const std::string n_inst = std::to_string(s.tree_instances) + " trees";
  checks.push_back({"bp-only time marginals vs enumeration", worst_t <= 1e-8, worst_t, 1e-8, n_inst});
  checks.push_back({"bp-only source marginals vs enumeration", worst_x <= 1e-8, worst_x, 1e-8, n_inst});
  checks.push_back({"bp-only free entropy vs log Z / N", worst_phi <= 1e-6, worst_phi, 1e-6, n_inst});
  checks.push_back({"bp-only converged on trees", not_converged == 0, static_cast<double>(not_converged), 0.0, n_inst});

  // hybrid against the Rademacher perceptron oracle
  double dev_sum = 0.0;
  std::size_t dev_count = 0;
  for (std::size_t k = 0; k < s.hybrid_instances; ++k) {
    const std::size_t n = s.max_nodes;
    const double lam = s.lambdas[k % s.lambdas.size()] < 1.0 ? s.lambdas[k % s.lambdas.size()] : 0.7;
    auto inst = make_tree_instance(n, tree_horizon(n, std::min(3, s.max_horizon)), lam, 0.3, 0.0,
                                   mix_seed(s.seed, 5000 + k), s.hybrid_weights);
    InferenceProblem p{inst.graph, inst.params, inst.obs, &inst.F, 0.0, WeightPrior::Rademacher};
    InferenceOptions o;
    o.seed = mix_seed(s.seed, 6000 + k);
    o.variance_mode = s.hybrid_variance;
    const auto r = run_bp_amp(p, o);
    const auto ex = enumerate_posterior(inst.graph, inst.params, inst.obs, OraclePrior::perceptron(inst.F, 0.0));
    if (r.failed || ex.contradiction) continue;
    double dev = 0.0;
    for (std::size_t i = 0; i < n; ++i) dev += std::abs(r.chi[i].plus - ex.x0_marginals[i].plus);
    dev_sum += dev / static_cast<double>(n);
    ++dev_count;
  }
  const double mean_dev = dev_count ? dev_sum / static_cast<double>(dev_count) : kInf;
  checks.push_back({"bp-amp source marginals vs enumeration, approximate (mean abs)", mean_dev <= 0.02, mean_dev, 0.02,
                    std::to_string(dev_count) + " perceptron trees, " + to_string(s.hybrid_variance) + " variances"});

  const auto matched = tree_nishimori_gap(s, s.control_lambda, 0x51);
  const auto mismatched = tree_nishimori_gap(s, s.control_lambda_inference, 0x51);
  checks.push_back({"nishimori gap, matched model", std::abs(matched.mean) <= 3.0 * matched.se, matched.mean,
                    3.0 * matched.se, std::to_string(matched.count) + " trees"});
  checks.push_back({"nishimori gap, mismatched lambda is detected", std::abs(mismatched.mean) > 3.0 * mismatched.se,
                    mismatched.mean, 3.0 * mismatched.se, std::to_string(mismatched.count) + " trees"});
  return checks;
}

inline void print_checks(std::ostream& os, const std::vector<ValidationCheck>& checks) {
  for (const auto& c : checks)
    os << (c.pass ? "PASS" : "FAIL") << "  " << c.name << "  value=" << c.value << " tol=" << c.tolerance << "  ("
       << c.detail << ")\n";
}

}  // namespace nss
