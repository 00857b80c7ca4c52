// Acceptance suite: one PASS/FAIL line per criterion. `--criterion k` runs a
// single criterion; the exit code is nonzero if any criterion run fails.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <random>
#include <sstream>

#include "CLI11.hpp"
#include "nss/experiment.hpp"
#include "nss/validation.hpp"
#include "test_support.hpp"

using namespace nss;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string sci(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", x);
  return buf;
}

json load(const std::string& name) {
  std::ifstream f(fs::path(NSS_CONFIG_DIR) / name);
  if (!f) throw std::runtime_error("missing config " + name);
  return json::parse(f, nullptr, true, true);
}

SweepSpec sweep_from(const std::string& name) {
  auto s = sweep_spec_from_json(load(name));
  s.output_dir.clear();
  s.workers = 0;
  return s;
}

const SummaryRow* find_row(const std::vector<SummaryRow>& rows, const std::vector<json>& at) {
  for (const auto& r : rows)
    if (r.coords == at) return &r;
  return nullptr;
}

void note(const std::string& line) { std::cout << "  " << line << "\n"; }

// 1. BP-only marginals and free entropy against exact enumeration on trees.
Outcome tree_exactness() {
  ValidationSpec s = validation_spec_from_json(load("validate.json"));
  double worst_t = 0, worst_x = 0, worst_phi = 0;
  for (std::size_t k = 0; k < s.tree_instances; ++k) {
    const auto c = compare_bp_only_with_oracle(tree_suite_instance(s, k), s.kappa);
    worst_t = std::max(worst_t, c.time_marginal_error);
    worst_x = std::max(worst_x, c.x0_marginal_error);
    worst_phi = std::max(worst_phi, c.phi_error);
  }
  return {worst_t <= 1e-8 && worst_x <= 1e-8 && worst_phi <= 1e-6,
          std::to_string(s.tree_instances) + " trees, max |b - exact| " + sci(worst_t) + ", max |chi - exact| " +
              sci(worst_x) + ", max |phi - logZ/N| " + sci(worst_phi)};
}

// 2. Denoisers against quadrature of their integral definitions.
Outcome denoisers() {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> om(-3, 3), nu(0, 1), lv(std::log(0.05), std::log(5.0)), ka(-2, 1);
  double worst_g = 0, worst_eta = 0;
  for (int k = 0; k < 1000; ++k) {
    const double w = om(rng), n = nu(rng), V = std::exp(lv(rng)), kappa = ka(rng);
    worst_g = std::max(worst_g, std::abs(g_out(w, n, V, kappa) - nss_test::g_out_quadrature(w, n, V, kappa)));
    worst_eta = std::max(worst_eta, std::abs(eta_field(w, V, kappa).plus - nss_test::eta_plus_quadrature(w, V, kappa)));
  }
  std::uniform_real_distribution<double> ua(0, 5), ub(-5, 5);
  double worst_fv = 0;
  for (auto prior : {WeightPrior::Gaussian, WeightPrior::Rademacher})
    for (int k = 0; k < 1000; ++k) {
      const double A = ua(rng), B = ub(rng), h = 1e-5 * std::max(1.0, std::abs(B));
      const double fd = (f_in(A, B + h, prior).mean - f_in(A, B - h, prior).mean) / (2 * h);
      const double fv = f_in(A, B, prior).variance;
      worst_fv = std::max(worst_fv, std::abs(fv - fd) / std::abs(fv));
    }
  return {worst_g <= 1e-8 && worst_eta <= 1e-8 && worst_fv <= 1e-5,
          "1000 points, max |g_out - quad| " + sci(worst_g) + ", max |eta - quad| " + sci(worst_eta) +
              ", max rel |f_v - fd| " + sci(worst_fv)};
}

// 3. Empirical source fraction at N = 1e5. Rademacher weights make every
// preactivation exactly standard normal given u, so nodes are independent.
Outcome source_density_check() {
  bool ok = true;
  std::vector<std::string> parts;
  const std::size_t n = 100000;
  for (double kappa : {-2.0, -1.0, 0.0}) {
    const auto prior = make_perceptron_prior(n, 50, kappa, WeightPrior::Rademacher, 3);
    std::size_t src = 0;
    for (int x : sample_sources(prior)) src += x == -1;
    const double p = source_density(kappa), f = static_cast<double>(src) / n;
    const double se = std::sqrt(p * (1 - p) / n);
    ok = ok && std::abs(f - p) <= 3 * se;
    parts.push_back("kappa " + sci(kappa) + ": " + sci(f) + " vs " + sci(p) + " (" + sci(std::abs(f - p) / se) + " se)");
  }
  return {ok, parts[0] + "; " + parts[1] + "; " + parts[2]};
}

// 4. Informed Rademacher runs at lambda = 1 sit at phi = -log2/alpha. Every
// run must stay on the perfect-recovery state and meet the tolerance. The
// joint residual is reported but not required: at N = 3000 a few weakly
// constrained weights keep moving without changing phi.
Outcome informed_free_entropy() {
  const RunConfig c = run_config_from_json(load("single_informed.json"));
  int perfect = 0, converged = 0;
  double worst = 0.0;
  for (std::uint64_t k = 0; k < 5; ++k) {
    const auto inst = build_instance(c, instance_seed(c, c.seed, k));
    const auto setup = make_setup(c, *inst);
    const auto r = infer(c, *inst, setup.params, setup.obs, inference_options(c));
    const double info = phi_info_closed_form(c.weights, inst->prior.alpha());
    const double o = r.failed ? 0.0 : overlap(r.x_hat, inst->x0);
    note("seed " + std::to_string(k) + ": converged " + std::to_string(r.converged) + " after " +
         std::to_string(r.iterations) + " (residual " + sci(r.residual) + "), O " + sci(o) + ", phi " +
         std::to_string(r.free_entropy.phi_rs) + ", phi_info " + std::to_string(info));
    perfect += !r.failed && o == 1.0;
    converged += r.converged;
    worst = std::max(worst, r.failed ? kInf : std::abs(r.free_entropy.phi_rs - info));
  }
  return {perfect == 5 && worst <= 1e-3, std::to_string(perfect) + "/5 runs with overlap 1 (" +
                                             std::to_string(converged) + " converged), max |phi - phi_info| " +
                                             sci(worst)};
}

// 5. At alpha = 0.25 BP-AMP is indistinguishable from BP-only; at rho = 1
// AMP-only and BP-AMP both recover everything.
Outcome baseline_limits() {
  auto s = sweep_from("baseline_limits.json");
  const auto rows = run_sweep(s).summary;
  bool ok = true;
  std::size_t rho_axis = 1;
  for (const auto& rho : s.axes[rho_axis].values) {
    const auto* hy = find_row(rows, {"bp-amp", rho});
    const auto* bp = find_row(rows, {"bp-only", rho});
    const bool same = intervals_overlap(hy->rescaled, bp->rescaled);
    ok = ok && same;
    note("rho " + rho.dump() + ": bp-amp " + sci(hy->rescaled.mean) + " +- " + sci(hy->rescaled.ci99) + ", bp-only " +
         sci(bp->rescaled.mean) + " +- " + sci(bp->rescaled.ci99) + (same ? "" : "  DISJOINT"));
  }
  const auto* full = find_row(rows, {"bp-amp", 1.0});
  SweepSpec amp = s;
  amp.axes = {{"observations.rho", {1.0}}};
  amp.base["algorithm"] = "amp-only";
  const auto amp_row = run_sweep(amp).summary.front();
  const bool perfect = full && full->rescaled.mean == 1.0 && amp_row.rescaled.mean == 1.0;
  note("rho 1: bp-amp rescaled " + sci(full ? full->rescaled.mean : NAN) + ", amp-only rescaled " +
       sci(amp_row.rescaled.mean));
  return {ok && perfect, std::string(ok ? "99% CIs overlap at every rho" : "CIs disjoint somewhere") +
                             (perfect ? ", perfect recovery at rho = 1" : ", rho = 1 not perfect")};
}

// 6. Gaussian weights: rescaled overlap non-decreasing in alpha at interior
// rho, and no isolated jump along rho. A jump is an increment larger than
// twice its larger neighbor plus the two points' CI half-widths.
Outcome gaussian_monotone() {
  auto s = sweep_from("gaussian_alpha_sweep.json");
  const auto rows = run_sweep(s).summary;
  const auto& alphas = s.axes[0].values;
  const auto& rhos = s.axes[1].values;
  bool monotone = true, continuous = true;
  for (std::size_t k = 1; k + 1 < rhos.size(); ++k) {
    std::string line = "rho " + rhos[k].dump() + ":";
    double prev = -kInf;
    for (const auto& a : alphas) {
      const double m = find_row(rows, {a, rhos[k]})->rescaled.mean;
      line += " " + sci(m);
      if (m < prev) {
        monotone = false;
        line += "(!)";
      }
      prev = m;
    }
    note(line);
  }
  for (const auto& a : alphas) {
    std::vector<const SummaryRow*> curve;
    for (const auto& r : rhos) curve.push_back(find_row(rows, {a, r}));
    auto step = [&](std::size_t k) { return std::abs(curve[k + 1]->rescaled.mean - curve[k]->rescaled.mean); };
    for (std::size_t k = 0; k + 1 < curve.size(); ++k) {
      double neighbor = 0.0;
      if (k > 0) neighbor = std::max(neighbor, step(k - 1));
      if (k + 2 < curve.size()) neighbor = std::max(neighbor, step(k + 1));
      if (step(k) > 2 * neighbor + curve[k]->rescaled.ci99 + curve[k + 1]->rescaled.ci99) {
        continuous = false;
        note("alpha " + a.dump() + ": jump " + sci(step(k)) + " between rho " + rhos[k].dump() + " and " +
             rhos[k + 1].dump());
      }
    }
  }
  return {monotone && continuous, std::string(monotone ? "monotone in alpha" : "not monotone in alpha") +
                                      (continuous ? ", curves continuous" : ", jump detected")};
}

// 7. Rademacher, kappa = 0, alpha = 10: random and informed branches split,
// rho_IT < rho_c, and phi(random) = phi_info above rho_c.
Outcome first_order_transition() {
  auto s = transition_spec_from_json(load("rademacher_transition.json"));
  s.output_dir.clear();
  s.workers = 0;
  const auto row = run_transition_scan(s).front();
  bool split = false;
  for (const auto& p : row.points) {
    const bool differ = p.overlap_informed - p.overlap_random > 0.01 && std::abs(p.phi_informed - p.phi_random) > 1e-3;
    split = split || differ;
    note("rho " + sci(p.rho) + ": O random " + sci(p.overlap_random) + ", O informed " + sci(p.overlap_informed) +
         ", phi random " + std::to_string(p.phi_random) + ", phi informed " + std::to_string(p.phi_informed) +
         ", perfect " + sci(p.perfect_fraction) + (differ ? "  split" : ""));
  }
  const auto& t = row.thresholds;
  bool above = t.rho_c.has_value();
  double worst = 0.0;
  if (t.rho_c)
    for (const auto& p : row.points)
      if (p.rho > *t.rho_c) worst = std::max(worst, std::abs(p.phi_random - row.phi_info));
  above = above && worst <= 1e-3;
  note("phi_info " + std::to_string(row.phi_info) + ", rho_IT " + (t.rho_it ? sci(*t.rho_it) : "absent") +
       ", rho_c " + (t.rho_c ? sci(*t.rho_c) : "absent"));
  return {split && t.hard_phase() && above,
          std::string(split ? "branches split" : "branches never split") +
              (t.hard_phase() ? ", rho_IT < rho_c" : ", no ordered rho_IT < rho_c") +
              ", max |phi_random - phi_info| above rho_c " + sci(worst)};
}

// 8. Nishimori: O - MO is within 3 SE of zero at both sizes and does not
// grow significantly with N.
Outcome nishimori() {
  auto s = sweep_from("nishimori.json");
  const auto rows = run_sweep(s).summary;
  bool ok = true;
  for (const auto& r : rows) {
    const bool zero = std::abs(r.gap.mean) <= 3 * r.gap.se;
    ok = ok && zero;
    note("N " + r.coords[0].dump() + ": O - MO " + sci(r.gap.mean) + " (se " + sci(r.gap.se) + ")");
  }
  const auto &small = rows.front().gap, &large = rows.back().gap;
  const bool no_growth = std::abs(large.mean) - std::abs(small.mean) <= 3 * std::hypot(small.se, large.se);
  return {ok && no_growth, std::string(ok ? "gap within 3 SE of 0" : "gap beyond 3 SE") +
                               (no_growth ? ", no growth with N" : ", grows with N")};
}

// 9. Same master seed, different worker counts: byte-identical summary.
Outcome determinism() {
  auto s = sweep_from("nishimori.json");
  s.base["graph"]["n"] = 600;
  s.axes = {{"observations.rho", {0.1, 0.4}}, {"init", {"random", "informed"}}};
  s.seeds = 3;
  s.write_runs = false;
  auto read = [](const fs::path& p) {
    std::ifstream f(p, std::ios::binary);
    std::stringstream ss;
    ss << f.rdbuf();
    return ss.str();
  };
  std::string out[2];
  for (int k = 0; k < 2; ++k) {
    s.output_dir = (fs::temp_directory_path() / ("nss_acceptance_det_" + std::to_string(k))).string();
    s.workers = k == 0 ? 1 : 3;
    run_sweep(s);
    out[k] = read(fs::path(s.output_dir) / "summary.csv");
    fs::remove_all(s.output_dir);
  }
  return {!out[0].empty() && out[0] == out[1], std::to_string(out[0].size()) + " bytes, 1 vs 3 workers"};
}

// 10. RR(5) and ER(5) give overlapping rescaled-overlap CIs at every rho.
Outcome ensembles() {
  auto s = sweep_from("ensembles.json");
  const auto rows = run_sweep(s).summary;
  bool ok = true;
  for (const auto& kappa : s.axes[0].values)
    for (const auto& rho : s.axes[2].values) {
      const auto* rr = find_row(rows, {kappa, "rr", rho});
      const auto* er = find_row(rows, {kappa, "er", rho});
      const bool same = intervals_overlap(rr->rescaled, er->rescaled);
      ok = ok && same;
      note("kappa " + kappa.dump() + " rho " + rho.dump() + ": rr " + sci(rr->rescaled.mean) + " +- " +
           sci(rr->rescaled.ci99) + ", er " + sci(er->rescaled.mean) + " +- " + sci(er->rescaled.ci99) +
           (same ? "" : "  DISJOINT"));
    }
  return {ok, ok ? "99% CIs overlap everywhere" : "CIs disjoint somewhere"};
}

const std::map<int, std::pair<const char*, std::function<Outcome()>>> kCriteria{
    {1, {"tree exactness", tree_exactness}},
    {2, {"denoiser correctness", denoisers}},
    {3, {"source-density formula", source_density_check}},
    {4, {"informed free entropy", informed_free_entropy}},
    {5, {"baseline limits", baseline_limits}},
    {6, {"monotonicity in alpha", gaussian_monotone}},
    {7, {"first-order transition", first_order_transition}},
    {8, {"nishimori consistency", nishimori}},
    {9, {"determinism", determinism}},
    {10, {"ensemble robustness", ensembles}},
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"acceptance criteria"};
  int only = 0;
  app.add_option("--criterion", only, "run one criterion (1-10)")->check(CLI::Range(1, 10));
  CLI11_PARSE(app, argc, argv);
  bool all = true;
  for (const auto& [k, entry] : kCriteria) {
    if (only && k != only) continue;
    Outcome o;
    try {
      o = entry.second();
    } catch (const std::exception& e) {
      o = {false, std::string("error: ") + e.what()};
    }
    std::cout << (o.pass ? "PASS" : "FAIL") << " criterion " << k << " (" << entry.first << "): " << o.detail << "\n"
              << std::flush;
    all = all && o.pass;
  }
  return all ? 0 : 1;
}
