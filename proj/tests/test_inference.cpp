#include <gtest/gtest.h>

#include "nss/experiment.hpp"
#include "nss/inference.hpp"
#include "nss/metrics.hpp"
#include "nss/validation.hpp"

using namespace nss;

namespace {

RunConfig small_config(WeightPrior w, double rho) {
  RunConfig c;
  c.n = 400;
  c.degree = 3;
  c.weights = w;
  c.kappa = -1.0;
  c.alpha = 4.0;
  c.rho = rho;
  return c;
}

struct Outcome {
  std::shared_ptr<Instance> inst;
  RunResult r;
};

Outcome run(const RunConfig& c, std::uint64_t seed = 1) {
  Outcome o;
  o.inst = build_instance(c, instance_seed(c, seed, 0));
  const auto setup = make_setup(c, *o.inst);
  o.r = infer(c, *o.inst, setup.params, setup.obs, inference_options(c));
  return o;
}

}  // namespace

TEST(Estimators, MmoTieGoesToPlusOne) {
  const std::vector<BinaryDistribution> chi{{0.5, 0.5}, {0.2, 0.8}, {0.9, 0.1}};
  EXPECT_EQ(mmo_estimate(chi), (std::vector<int>{+1, -1, +1}));
}

TEST(Estimators, MmseTimes) {
  const int K = 5;  // T = 3
  std::vector<double> b(2 * K, 0.0);
  b[4] = 1.0;  // node 0: point mass at t = 3
  for (int k = 0; k < K; ++k) b[K + k] = 1.0 / K;
  const auto t = mmse_times(b, K);
  EXPECT_DOUBLE_EQ(t[0], 3.0);
  EXPECT_NEAR(t[1], 1.0, 1e-15);
}

TEST(Estimators, CombineIsNormalizedProduct) {
  const auto c = combine({0.8, 0.2}, {0.25, 0.75});
  EXPECT_NEAR(c.plus, 0.2 / 0.35, 1e-15);
  EXPECT_NEAR(c.minus, 0.15 / 0.35, 1e-15);
  const auto z = combine({1.0, 0.0}, {0.0, 1.0});
  EXPECT_EQ(z.plus, 0.5);
}

// Everything pinned: chi is exact within three outer iterations. The joint
// residual keeps running until the weight means settle, which takes longer.
TEST(RunBpAmp, FullyObservedDeterministicIsExact) {
  for (auto w : {WeightPrior::Gaussian, WeightPrior::Rademacher}) {
    auto c = small_config(w, 1.0);
    c.max_iterations = 3;
    const auto [inst, r] = run(c);
    ASSERT_FALSE(r.failed) << r.failure;
    EXPECT_EQ(r.x_hat, inst->x0);
    for (std::size_t i = 0; i < r.chi.size(); ++i) EXPECT_EQ(r.chi[i].plus, inst->x0[i] == 1 ? 1.0 : 0.0);
  }
}

TEST(RunBpAmp, MarginalsNormalizedAndEstimatorsConsistent) {
  auto c = small_config(WeightPrior::Gaussian, 0.2);
  c.lambda = 0.6;
  const auto [inst, r] = run(c);
  ASSERT_FALSE(r.failed) << r.failure;
  for (const auto& x : r.chi) {
    EXPECT_NEAR(x.plus + x.minus, 1.0, 1e-12);
    EXPECT_GE(x.plus, 0.0);
    EXPECT_GE(x.minus, 0.0);
  }
  EXPECT_EQ(r.x_hat, mmo_estimate(r.chi));
  EXPECT_EQ(r.t_hat, mmse_times(r.time_beliefs, r.K));
  for (std::size_t i = 0; i < r.chi.size(); ++i) {
    double s = 0.0;
    for (double b : r.time_belief(i)) s += b;
    EXPECT_NEAR(s, 1.0, 1e-10);
  }
}

TEST(RunBpAmp, Deterministic) {
  auto c = small_config(WeightPrior::Rademacher, 0.3);
  c.lambda = 0.7;
  const auto a = run(c).r, b = run(c).r;
  ASSERT_EQ(a.chi.size(), b.chi.size());
  for (std::size_t i = 0; i < a.chi.size(); ++i) EXPECT_EQ(a.chi[i].plus, b.chi[i].plus);
  EXPECT_EQ(a.weight_means, b.weight_means);
  EXPECT_EQ(a.iterations, b.iterations);
  EXPECT_EQ(a.free_entropy.phi_rs, b.free_entropy.phi_rs);
}

// The informed branch is the perfect-recovery state for every rho with
// sensors. At rho = 0 nu is exactly uniform and cannot hold it.
TEST(RunBpAmp, InformedDeterministicRecoversTruth) {
  for (double rho : {0.1, 0.3, 0.6, 1.0}) {
    RunConfig c = small_config(WeightPrior::Rademacher, rho);
    c.n = 3000;
    c.alpha = 6.0;
    c.init = InitMode::Informed;
    c.amp_damping = 0.7;
    const auto [inst, r] = run(c, 3);
    ASSERT_FALSE(r.failed) << r.failure;
    EXPECT_EQ(overlap(r.x_hat, inst->x0), 1.0) << "rho " << rho;
    EXPECT_EQ(sign_agreement(r.weight_means, inst->prior.u), 1.0) << "rho " << rho;
  }
}

TEST(RunBpOnly, NoObservationsGivesPriorDensity) {
  for (double kappa : {-1.0, 0.0}) {
    auto c = small_config(WeightPrior::Gaussian, 0.0);
    c.kappa = kappa;
    c.lambda = 0.5;
    c.algorithm = Algorithm::BpOnly;
    const auto [inst, r] = run(c);
    ASSERT_FALSE(r.failed);
    for (const auto& x : r.chi) EXPECT_NEAR(x.minus, source_density(kappa), 1e-12);
    EXPECT_TRUE(r.weight_means.empty());
  }
}

TEST(RunBpOnly, TreesMatchEnumeration) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const std::size_t n = 4 + seed % 5;
    const auto inst = make_tree_instance(n, tree_horizon(n, 4), 0.4 + 0.06 * seed, seed % 2 ? 0.3 : 0.0, -1.0, seed);
    const auto c = compare_bp_only_with_oracle(inst, -1.0);
    EXPECT_TRUE(c.converged);
    EXPECT_LE(c.time_marginal_error, 1e-8) << "seed " << seed;
    EXPECT_LE(c.x0_marginal_error, 1e-8) << "seed " << seed;
    EXPECT_LE(c.phi_error, 1e-6) << "seed " << seed;
  }
}

TEST(RunAmpOnly, NoObservationsKeepsWeightsAtZero) {
  auto c = small_config(WeightPrior::Rademacher, 0.0);
  c.algorithm = Algorithm::AmpOnly;
  const auto [inst, r] = run(c);
  ASSERT_FALSE(r.failed);
  EXPECT_TRUE(r.converged);
  for (double a : r.weight_means) EXPECT_LT(std::abs(a), 1e-12);
  for (const auto& e : r.eta) EXPECT_NEAR(e.minus, source_density(c.kappa), 1e-9);
}

TEST(RunAmpOnly, ManyLabelsRecoverRademacherWeights) {
  auto c = small_config(WeightPrior::Rademacher, 1.0);
  c.n = 2000;
  c.alpha = 8.0;
  c.algorithm = Algorithm::AmpOnly;
  const auto [inst, r] = run(c);
  ASSERT_FALSE(r.failed);
  EXPECT_EQ(sign_agreement(r.weight_means, inst->prior.u), 1.0);
  EXPECT_EQ(r.x_hat, inst->x0);
}

TEST(RunAmpOnly, NeverTouchesTimeBeliefs) {
  auto c = small_config(WeightPrior::Gaussian, 0.5);
  c.algorithm = Algorithm::AmpOnly;
  const auto [inst, r] = run(c);
  EXPECT_EQ(r.K, 0);
  EXPECT_TRUE(r.time_beliefs.empty());
}

TEST(RunInference, NeedsCovariates) {
  const auto g = generate_random_tree(5, 1);
  SpreadParams p;
  p.T = 3;
  const auto obs = ObservationSet::none(5);
  InferenceProblem prob{g, p, obs};
  InferenceOptions o;
  EXPECT_THROW(run_inference(prob, o), std::invalid_argument);
  o.algorithm = Algorithm::BpOnly;
  EXPECT_NO_THROW(run_inference(prob, o));
}
