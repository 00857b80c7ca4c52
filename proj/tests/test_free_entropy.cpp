#include <gtest/gtest.h>

#include <numbers>

#include "nss/exact_oracle.hpp"
#include "nss/experiment.hpp"
#include "nss/free_entropy.hpp"
#include "nss/inference.hpp"
#include "nss/metrics.hpp"
#include "test_support.hpp"

using namespace nss;

namespace {

RunConfig informed_config(WeightPrior w, double alpha, double rho) {
  RunConfig c;
  c.n = 1200;
  c.degree = 3;
  c.weights = w;
  c.kappa = -1.0;
  c.alpha = alpha;
  c.rho = rho;
  c.init = InitMode::Informed;
  return c;
}

RunResult run_on(const RunConfig& c, std::uint64_t seed, bool reveal = false) {
  const auto inst = build_instance(c, instance_seed(c, seed, 0));
  auto setup = make_setup(c, *inst);
  if (reveal) setup.obs.revealed_x0 = inst->x0;
  return infer(c, *inst, setup.params, setup.obs, inference_options(c));
}

ScanPoint point(double rho, double phi, double perfect) {
  ScanPoint p;
  p.rho = rho;
  p.phi_random = phi;
  p.perfect_fraction = perfect;
  return p;
}

}  // namespace

TEST(PhiInfo, ClosedForms) {
  EXPECT_NEAR(phi_info_closed_form(WeightPrior::Rademacher, 6.0), -0.11552, 1e-5);
  EXPECT_NEAR(phi_info_closed_form(WeightPrior::Rademacher, 100.0), -0.006931, 1e-6);
  EXPECT_NEAR(phi_info_closed_form(WeightPrior::Gaussian, 4.0), (-0.5 - 0.5 * std::log(2 * std::numbers::pi)) / 4, 1e-15);
}

TEST(FreeEntropyReport, ComponentsSumToTotal) {
  RunConfig c = informed_config(WeightPrior::Gaussian, 4.0, 0.2);
  c.n = 400;
  c.lambda = 0.6;
  c.init = InitMode::Random;
  const auto r = run_on(c, 3);
  ASSERT_FALSE(r.failed);
  const auto& f = r.free_entropy;
  const double sum = f.node_term + f.edge_term + f.weight_prior_term + f.output_term + f.ab_correction + f.omega_correction;
  EXPECT_NEAR(f.phi_rs, sum, 1e-9);
  EXPECT_TRUE(std::isfinite(f.phi_rs));
}

// Separable prior on a tree: the Bethe value is exact.
TEST(FreeEntropyReport, TreeMatchesExactLogPartition) {
  for (std::uint64_t seed = 0; seed < 8; ++seed) {
    const std::size_t n = 7;
    const auto g = generate_random_tree(n, seed);
    SpreadParams p;
    p.lambda = 0.4 + 0.05 * seed;
    std::vector<int> x0(n, +1);
    x0[seed % n] = -1;
    const auto truth = sample_epidemic(g, x0, p, seed, 3).trajectory;
    p.T = truth.T;
    const auto obs = make_sensors(truth, 0.3, seed);
    const double kappa = -0.7;
    InferenceProblem prob{g, p, obs, nullptr, kappa};
    InferenceOptions opt;
    opt.algorithm = Algorithm::BpOnly;
    opt.tolerance = 1e-13;
    const auto r = run_bp_only(prob, opt);
    ASSERT_TRUE(r.converged);
    const double d = source_density(kappa);
    const auto ex = enumerate_posterior(g, p, obs, OraclePrior::independent(n, {1 - d, d}));
    EXPECT_NEAR(r.free_entropy.phi_rs, ex.log_z / n, 1e-6) << "seed " << seed;
  }
}

// Rademacher, lambda = 1: the perfect-recovery state carries -log2/alpha.
TEST(FreeEntropyReport, InformedRademacherGivesPhiInfo) {
  auto c = informed_config(WeightPrior::Rademacher, 6.0, 0.2);
  c.n = 3000;
  c.amp_damping = 0.7;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const auto inst = build_instance(c, instance_seed(c, seed, 0));
    const auto setup = make_setup(c, *inst);
    const auto r = infer(c, *inst, setup.params, setup.obs, inference_options(c));
    ASSERT_FALSE(r.failed) << r.failure;
    EXPECT_EQ(overlap(r.x_hat, inst->x0), 1.0) << "seed " << seed;
    EXPECT_NEAR(r.free_entropy.phi_rs, phi_info_closed_form(c.weights, inst->prior.alpha()), 1e-3) << "seed " << seed;
  }
}

// Gaussian closed form against quadrature of E log N(u; 0, 1).
TEST(PhiInfo, GaussianClosedFormMatchesQuadrature) {
  const double e = nss_test::integrate(
      [](double u) {
        const double p = std::exp(-0.5 * u * u) / std::sqrt(2 * std::numbers::pi);
        return p * std::log(p);
      },
      -12.0, 12.0, 256);
  for (double alpha : {0.25, 4.0, 16.0}) EXPECT_NEAR(phi_info_closed_form(WeightPrior::Gaussian, alpha), e / alpha, 1e-12);
}

// phi_info from a run with x0 revealed approaches the deterministic closed
// form as lambda -> 1.
TEST(PhiInfo, RunApproachesClosedFormAsLambdaGoesToOne) {
  std::vector<double> gaps;
  for (double lambda : {0.95, 0.99, 1.0}) {
    auto c = informed_config(WeightPrior::Rademacher, 6.0, 0.2);
    c.lambda = lambda;
    c.amp_damping = 0.7;
    const auto inst = build_instance(c, instance_seed(c, 9, 0));
    const auto setup = make_setup(c, *inst);
    ObservationSet obs = setup.obs;
    obs.revealed_x0 = inst->x0;
    const auto r = infer(c, *inst, setup.params, obs, inference_options(c));
    ASSERT_FALSE(r.failed) << r.failure;
    gaps.push_back(std::abs(r.free_entropy.phi_rs - phi_info_closed_form(c.weights, inst->prior.alpha())));
  }
  EXPECT_LT(gaps[2], 1e-3);
  EXPECT_LT(gaps[1], gaps[0]);
  EXPECT_LT(gaps[1], 0.05);
}

TEST(FreeEntropyReport, InformedNotBelowRandom) {
  auto c = informed_config(WeightPrior::Rademacher, 6.0, 0.3);
  const auto inf = run_on(c, 2);
  c.init = InitMode::Random;
  const auto rnd = run_on(c, 2);
  ASSERT_FALSE(inf.failed);
  ASSERT_FALSE(rnd.failed);
  EXPECT_GE(inf.free_entropy.phi_rs, rnd.free_entropy.phi_rs - 1e-6);
}

TEST(Thresholds, AbsentWhenNothingCrosses) {
  const std::vector<ScanPoint> grid{point(0.0, 0.3, 0.0), point(0.5, 0.2, 0.0), point(1.0, 0.1, 0.0)};
  const auto t = locate_thresholds(grid, 0.0);
  EXPECT_FALSE(t.rho_c.has_value());
  EXPECT_FALSE(t.rho_it.has_value());
  EXPECT_FALSE(t.hard_phase());
}

TEST(Thresholds, InformationThresholdInterpolates) {
  const std::vector<ScanPoint> grid{point(0.0, 0.5, 0), point(0.1, 0.2, 0), point(0.2, -0.2, 0), point(0.3, -0.3, 0)};
  EXPECT_NEAR(*locate_information_threshold(grid, 0.0), 0.15, 1e-15);
  EXPECT_NEAR(*locate_information_threshold(grid, 0.35), 0.05, 1e-15);
  EXPECT_EQ(*locate_information_threshold(grid, 1.0), 0.0);
}

TEST(Thresholds, SpinodalBisects) {
  const double truth = 0.237;
  int calls = 0;
  auto eval = [&](double rho) {
    ++calls;
    return point(rho, 0.0, rho >= truth ? 1.0 : 0.0);
  };
  std::vector<ScanPoint> grid;
  for (int k = 0; k <= 10; ++k) grid.push_back(eval(0.1 * k));
  calls = 0;
  const auto rc = locate_spinodal(grid, eval, 1e-3);
  ASSERT_TRUE(rc.has_value());
  EXPECT_GE(*rc, truth);
  EXPECT_LE(*rc - truth, 1e-3);
  EXPECT_LE(calls, 7);
  // no refinement without an evaluator
  EXPECT_NEAR(*locate_spinodal(grid, {}, 1e-3), 0.3, 1e-12);
}

TEST(Thresholds, HardPhase) {
  std::vector<ScanPoint> grid{point(0.0, 0.2, 0.0), point(0.2, -0.1, 0.0), point(0.4, -0.1, 1.0)};
  const auto t = locate_thresholds(grid, 0.0);
  ASSERT_TRUE(t.rho_c && t.rho_it);
  EXPECT_LT(*t.rho_it, *t.rho_c);
  EXPECT_TRUE(t.hard_phase());
}
