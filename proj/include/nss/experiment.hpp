#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <numeric>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "json.hpp"
#include "nss/amp.hpp"
#include "nss/common.hpp"
#include "nss/free_entropy.hpp"
#include "nss/graph.hpp"
#include "nss/inference.hpp"
#include "nss/metrics.hpp"
#include "nss/observation.hpp"
#include "nss/perceptron.hpp"
#include "nss/spreading.hpp"

namespace nss {

using json = nlohmann::json;

enum class GraphEnsemble { RandomRegular, ErdosRenyi, Tree };

inline std::string to_string(GraphEnsemble e) {
  switch (e) {
    case GraphEnsemble::RandomRegular: return "rr";
    case GraphEnsemble::ErdosRenyi: return "er";
    case GraphEnsemble::Tree: return "tree";
  }
  return "?";
}

inline GraphEnsemble parse_graph_ensemble(const std::string& s) {
  if (s == "rr" || s == "RR" || s == "random_regular") return GraphEnsemble::RandomRegular;
  if (s == "er" || s == "ER" || s == "erdos_renyi") return GraphEnsemble::ErdosRenyi;
  if (s == "tree") return GraphEnsemble::Tree;
  throw std::invalid_argument("unknown graph ensemble '" + s + "'");
}

// One fully specified run. Serialized as nested JSON sections: graph,
// spreading, prior, observations, inference plus top-level algorithm, init
// and seed.
struct RunConfig {
  GraphEnsemble ensemble = GraphEnsemble::RandomRegular;
  std::size_t n = 2000;
  double degree = 3.0;  // exact for rr, average for er

  SpreadModel model = SpreadModel::SI;
  double lambda = 1.0;
  int delta = 1;
  int t_max = 10000;

  WeightPrior weights = WeightPrior::Gaussian;
  double kappa = 0.0;
  double alpha = 1.0;
  std::optional<std::size_t> m;          // overrides alpha when set
  std::optional<double> nm_product;      // N chosen as round(sqrt(alpha * NM))

  ObservationKind obs_kind = ObservationKind::Sensors;
  double rho = 0.0;
  int t_obs = -1;  // snapshot time; -1 means the natural horizon

  Algorithm algorithm = Algorithm::BpAmp;
  InitMode init = InitMode::Random;
  double damping = 0.5;
  double amp_damping = 0.0;
  double variance_floor = kAmpVarianceFloor;
  AmpVariance variance_mode = AmpVariance::Scalar;
  double tolerance = 1e-7;
  int max_iterations = 1000;
  int bp_sweeps_per_iteration = 1;
  std::optional<double> lambda_inference;  // mismatched-model control
  bool phi_info_run = false;               // compute phi_info by a run when lambda < 1

  std::uint64_t seed = 1;
};

template <class T>
void read_opt(const json& j, const char* key, T& out) {
  if (j.contains(key) && !j.at(key).is_null()) out = j.at(key).get<T>();
}

inline RunConfig run_config_from_json(const json& j) {
  RunConfig c;
  if (j.contains("graph")) {
    const auto& g = j.at("graph");
    if (g.contains("ensemble")) c.ensemble = parse_graph_ensemble(g.at("ensemble").get<std::string>());
    read_opt(g, "n", c.n);
    read_opt(g, "degree", c.degree);
  }
  if (j.contains("spreading")) {
    const auto& s = j.at("spreading");
    if (s.contains("model")) c.model = parse_spread_model(s.at("model").get<std::string>());
    read_opt(s, "lambda", c.lambda);
    read_opt(s, "delta", c.delta);
    read_opt(s, "t_max", c.t_max);
  }
  if (j.contains("prior")) {
    const auto& p = j.at("prior");
    if (p.contains("weights")) c.weights = parse_weight_prior(p.at("weights").get<std::string>());
    read_opt(p, "kappa", c.kappa);
    read_opt(p, "alpha", c.alpha);
    if (p.contains("m") && !p.at("m").is_null()) c.m = p.at("m").get<std::size_t>();
    if (p.contains("nm_product") && !p.at("nm_product").is_null()) c.nm_product = p.at("nm_product").get<double>();
  }
  if (j.contains("observations")) {
    const auto& o = j.at("observations");
    if (o.contains("kind")) c.obs_kind = parse_observation_kind(o.at("kind").get<std::string>());
    read_opt(o, "rho", c.rho);
    read_opt(o, "t_obs", c.t_obs);
  }
  if (j.contains("algorithm")) c.algorithm = parse_algorithm(j.at("algorithm").get<std::string>());
  if (j.contains("init")) c.init = parse_init_mode(j.at("init").get<std::string>());
  if (j.contains("inference")) {
    const auto& i = j.at("inference");
    read_opt(i, "damping", c.damping);
    read_opt(i, "amp_damping", c.amp_damping);
    read_opt(i, "variance_floor", c.variance_floor);
    if (i.contains("variance_mode")) c.variance_mode = parse_amp_variance(i.at("variance_mode").get<std::string>());
    read_opt(i, "tolerance", c.tolerance);
    read_opt(i, "max_iterations", c.max_iterations);
    read_opt(i, "bp_sweeps_per_iteration", c.bp_sweeps_per_iteration);
    read_opt(i, "phi_info_run", c.phi_info_run);
    if (i.contains("lambda") && !i.at("lambda").is_null()) c.lambda_inference = i.at("lambda").get<double>();
  }
  read_opt(j, "seed", c.seed);
  return c;
}

inline json instance_json(const RunConfig& c) {
  json j;
  j["graph"] = {{"ensemble", to_string(c.ensemble)}, {"n", c.n}, {"degree", c.degree}};
  j["spreading"] = {{"model", to_string(c.model)}, {"lambda", c.lambda}, {"delta", c.delta}, {"t_max", c.t_max}};
  j["prior"] = {{"weights", to_string(c.weights)}, {"kappa", c.kappa}, {"alpha", c.alpha}};
  j["prior"]["m"] = c.m ? json(*c.m) : json(nullptr);
  j["prior"]["nm_product"] = c.nm_product ? json(*c.nm_product) : json(nullptr);
  return j;
}

inline json to_json(const RunConfig& c) {
  json j = instance_json(c);
  j["observations"] = {{"kind", to_string(c.obs_kind)}, {"rho", c.rho}, {"t_obs", c.t_obs}};
  j["algorithm"] = to_string(c.algorithm);
  j["init"] = to_string(c.init);
  j["inference"] = {{"damping", c.damping},
                    {"amp_damping", c.amp_damping},
                    {"variance_floor", c.variance_floor},
                    {"variance_mode", to_string(c.variance_mode)},
                    {"tolerance", c.tolerance},
                    {"max_iterations", c.max_iterations},
                    {"bp_sweeps_per_iteration", c.bp_sweeps_per_iteration},
                    {"phi_info_run", c.phi_info_run}};
  j["inference"]["lambda"] = c.lambda_inference ? json(*c.lambda_inference) : json(nullptr);
  j["seed"] = c.seed;
  return j;
}

inline void validate(const RunConfig& c) {
  if (c.n == 0) throw std::invalid_argument("graph.n must be positive");
  if (!(c.lambda >= 0.0 && c.lambda <= 1.0)) throw std::invalid_argument("spreading.lambda outside [0,1]");
  if (c.lambda_inference && !(*c.lambda_inference >= 0.0 && *c.lambda_inference <= 1.0))
    throw std::invalid_argument("inference.lambda outside [0,1]");
  if (!(c.alpha > 0.0) && !c.m) throw std::invalid_argument("prior.alpha must be positive");
  if (!(c.rho >= 0.0 && c.rho <= 1.0)) throw std::invalid_argument("observations.rho outside [0,1]");
  if (c.delta < 1) throw std::invalid_argument("spreading.delta must be >= 1");
  if (!(c.variance_floor > 0.0)) throw std::invalid_argument("inference.variance_floor must be positive");
  if (!(c.damping >= 0.0 && c.damping < 1.0)) throw std::invalid_argument("inference.damping outside [0,1)");
  if (c.max_iterations < 1 || c.bp_sweeps_per_iteration < 1) throw std::invalid_argument("iteration caps must be >= 1");
}

// Node count actually requested before any component extraction.
inline std::size_t requested_nodes(const RunConfig& c) {
  if (c.nm_product) return static_cast<std::size_t>(std::llround(std::sqrt(c.alpha * *c.nm_product)));
  return c.n;
}

inline std::size_t weight_count(const RunConfig& c, std::size_t n_nodes) {
  if (c.m) return *c.m;
  return std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(static_cast<double>(n_nodes) / c.alpha)));
}

// Graph, perceptron prior, ground truth. Shared by every run that differs
// only in observations, algorithm or initialization.
struct Instance {
  std::uint64_t seed = 0;
  SparseGraph graph;
  PerceptronPrior prior;
  std::vector<int> x0;
  Trajectory truth;
  SpreadParams params;  // generative, with the realized horizon
  bool truncated = false;
};

inline std::uint64_t instance_seed(const RunConfig& c, std::uint64_t master, std::uint64_t seed_index) {
  return mix_seed(mix_seed(master, seed_index), hash_string(instance_json(c).dump()));
}

inline SparseGraph make_graph(const RunConfig& c, std::uint64_t seed) {
  const std::size_t n = requested_nodes(c);
  switch (c.ensemble) {
    case GraphEnsemble::RandomRegular:
      return generate_random_regular(n, static_cast<std::size_t>(std::llround(c.degree)), seed);
    case GraphEnsemble::ErdosRenyi: return generate_erdos_renyi(n, c.degree, seed);
    case GraphEnsemble::Tree: return generate_random_tree(n, seed);
  }
  throw std::invalid_argument("unknown ensemble");
}

inline SpreadParams spread_params(const RunConfig& c) {
  SpreadParams p;
  p.model = c.model;
  p.lambda = c.lambda;
  p.delta_rec = c.delta;
  p.t_max = c.t_max;
  return p;
}

inline std::shared_ptr<Instance> build_instance(const RunConfig& c, std::uint64_t seed) {
  validate(c);
  auto inst = std::make_shared<Instance>();
  inst->seed = seed;
  inst->graph = make_graph(c, mix_seed(seed, 1));
  const std::size_t n = inst->graph.n_nodes();
  inst->prior = make_perceptron_prior(n, weight_count(c, n), c.kappa, c.weights, mix_seed(seed, 2));
  inst->x0 = sample_sources(inst->prior);
  inst->params = spread_params(c);
  auto sample = sample_epidemic(inst->graph, inst->x0, inst->params, mix_seed(seed, 3));
  inst->truth = std::move(sample.trajectory);
  inst->truncated = sample.truncated;
  inst->params.T = inst->truth.T;
  return inst;
}

// Observations and the horizon inference works with. A snapshot before the
// natural horizon truncates the time axis at t_obs.
struct RunSetup {
  SpreadParams params;
  Trajectory truth;
  ObservationSet obs;
};

inline RunSetup make_setup(const RunConfig& c, const Instance& inst) {
  RunSetup s;
  s.params = inst.params;
  if (c.lambda_inference) s.params.lambda = *c.lambda_inference;
  s.truth = inst.truth;
  switch (c.obs_kind) {
    case ObservationKind::None: s.obs = ObservationSet::none(inst.graph.n_nodes()); break;
    case ObservationKind::Sensors: s.obs = make_sensors(inst.truth, c.rho, mix_seed(inst.seed, 4)); break;
    case ObservationKind::Snapshot: {
      const int t_obs = c.t_obs < 0 || c.t_obs > inst.truth.T ? inst.truth.T : c.t_obs;
      s.params.T = t_obs;
      s.truth.T = t_obs;
      for (auto& t : s.truth.t) t = std::min(t, t_obs);
      s.obs = make_snapshot(s.truth, t_obs, s.params);
      break;
    }
  }
  return s;
}

inline InferenceOptions inference_options(const RunConfig& c) {
  InferenceOptions o;
  o.algorithm = c.algorithm;
  o.init = c.init;
  o.damping = c.damping;
  o.amp_damping = c.amp_damping;
  o.variance_floor = c.variance_floor;
  o.variance_mode = c.variance_mode;
  o.tolerance = c.tolerance;
  o.max_iterations = c.max_iterations;
  o.bp_sweeps_per_iteration = c.bp_sweeps_per_iteration;
  return o;
}

inline RunResult infer(const RunConfig& c, const Instance& inst, const SpreadParams& params, const ObservationSet& obs,
                       InferenceOptions o) {
  InferenceProblem p{inst.graph, params, obs, &inst.prior.F, inst.prior.kappa, inst.prior.weights, inst.prior.u};
  o.seed = mix_seed(inst.seed, hash_string(to_string(c.algorithm) + "/" + to_string(o.init)));
  return run_inference(p, o);
}

// Same algorithm, random initialization, no observations.
inline RunResult run_baseline(const RunConfig& c, const Instance& inst, const SpreadParams& params) {
  auto o = inference_options(c);
  o.init = InitMode::Random;
  return infer(c, inst, params, ObservationSet::none(inst.graph.n_nodes()), o);
}

inline bool deterministic_spreading(const RunConfig& c, const SpreadParams& params) {
  return params.lambda == 1.0 && !c.lambda_inference;
}

// Free entropy of the perfect-recovery fixed point.
inline double compute_phi_info(const RunConfig& c, const Instance& inst, const RunSetup& setup) {
  if (deterministic_spreading(c, setup.params)) return phi_info_closed_form(c.weights, inst.prior.alpha());
  if (!c.phi_info_run) return std::numeric_limits<double>::quiet_NaN();
  ObservationSet obs = setup.obs;
  obs.revealed_x0 = inst.x0;
  auto o = inference_options(c);
  o.init = InitMode::Informed;
  const auto r = infer(c, inst, setup.params, obs, o);
  return r.failed ? std::numeric_limits<double>::quiet_NaN() : r.free_entropy.phi_rs;
}

struct RunRecord {
  std::size_t run_index = 0, grid_index = 0, seed_index = 0;
  RunConfig config;
  std::string status = "ok";
  std::size_t n = 0, m = 0, edges = 0;
  int T = 0;
  std::size_t n_sources = 0, n_sensors = 0;
  double overlap = NAN, mean_overlap = NAN, overlap_rnd = NAN, rescaled = NAN;
  double se = NAN, mse = NAN, r_se = NAN, r_mse = NAN;
  double phi_rs = NAN, phi_info = NAN;
  FreeEntropyReport free_entropy;
  bool converged = false, atypical = false;
  int iterations = 0;
  double residual = NAN;
  double weight_overlap = NAN;  // sign agreement of the weight means with the teacher
};

inline double sign_agreement(std::span<const double> a, std::span<const double> u) {
  if (a.empty() || a.size() != u.size()) return std::numeric_limits<double>::quiet_NaN();
  std::size_t same = 0;
  for (std::size_t k = 0; k < a.size(); ++k) same += (a[k] >= 0.0) == (u[k] >= 0.0) ? 1 : 0;
  return static_cast<double>(same) / static_cast<double>(a.size());
}

// One run on a prepared instance. `baseline` caches the empty-observation
// run keyed by everything it depends on.
inline RunRecord execute_run(const RunConfig& c, const Instance& inst,
                             std::map<std::string, RunResult>& baselines) {
  RunRecord rec;
  rec.config = c;
  rec.n = inst.graph.n_nodes();
  rec.m = inst.prior.m();
  rec.edges = inst.graph.n_edges();
  rec.n_sources = static_cast<std::size_t>(std::count(inst.x0.begin(), inst.x0.end(), -1));
  if (inst.truncated) rec.status = "truncated";

  const auto setup = make_setup(c, inst);
  rec.T = setup.params.T;
  rec.n_sensors = setup.obs.n_sensors();
  const auto result = infer(c, inst, setup.params, setup.obs, inference_options(c));

  json key = to_json(c);
  key.erase("observations");
  key.erase("init");
  key["horizon"] = setup.params.T;
  auto it = baselines.find(key.dump());
  if (it == baselines.end()) it = baselines.emplace(key.dump(), run_baseline(c, inst, setup.params)).first;
  const RunResult& base = it->second;

  rec.converged = result.converged;
  rec.iterations = result.iterations;
  rec.residual = result.residual;
  if (result.failed) {
    rec.status = "failed: " + result.failure;
    return rec;
  }
  const auto x_true = setup.truth.initial_state();
  rec.overlap = overlap(result.x_hat, x_true);
  rec.mean_overlap = mean_overlap_from_marginals(result.chi);
  if (!base.failed) {
    rec.overlap_rnd = overlap(base.x_hat, x_true);
    rec.rescaled = rescaled_overlap(rec.overlap, rec.overlap_rnd);
  }
  if (result.K > 0) {
    const auto err = squared_error_metrics(result.t_hat, setup.truth.t, result.time_beliefs, result.K,
                                           base.failed || base.K == 0 ? std::span<const double>{}
                                                                      : std::span<const double>(base.t_hat));
    rec.se = err.se;
    rec.mse = err.mse;
    rec.r_se = err.r_se;
    rec.r_mse = err.r_mse;
  }
  rec.free_entropy = result.free_entropy;
  rec.phi_rs = result.free_entropy.phi_rs;
  rec.phi_info = compute_phi_info(c, inst, setup);
  rec.atypical = is_atypical(rec.overlap, rec.mean_overlap);
  rec.weight_overlap = sign_agreement(result.weight_means, inst.prior.u);
  if (!result.converged && rec.status == "ok") rec.status = "not-converged";
  return rec;
}

inline json to_json(const RunRecord& r) {
  auto num = [](double x) { return std::isfinite(x) ? json(x) : json(nullptr); };
  json j;
  j["run_index"] = r.run_index;
  j["grid_index"] = r.grid_index;
  j["seed_index"] = r.seed_index;
  j["config"] = to_json(r.config);
  j["status"] = r.status;
  j["realized"] = {{"n", r.n}, {"m", r.m}, {"edges", r.edges}, {"T", r.T}, {"sources", r.n_sources},
                   {"sensors", r.n_sensors}};
  j["metrics"] = {{"overlap", num(r.overlap)},       {"mean_overlap", num(r.mean_overlap)},
                  {"overlap_rnd", num(r.overlap_rnd)}, {"rescaled_overlap", num(r.rescaled)},
                  {"se", num(r.se)},                 {"mse", num(r.mse)},
                  {"r_se", num(r.r_se)},             {"r_mse", num(r.r_mse)},
                  {"nishimori_gap", num(r.overlap - r.mean_overlap)},
                  {"weight_sign_agreement", num(r.weight_overlap)},
                  {"atypical", r.atypical}};
  const auto& f = r.free_entropy;
  j["free_entropy"] = {{"phi_rs", num(r.phi_rs)},
                       {"phi_info", num(r.phi_info)},
                       {"node", num(f.node_term)},
                       {"edge", num(f.edge_term)},
                       {"weight_prior", num(f.weight_prior_term)},
                       {"output", num(f.output_term)},
                       {"ab_correction", num(f.ab_correction)},
                       {"omega_correction", num(f.omega_correction)},
                       {"init", to_string(r.config.init)}};
  j["convergence"] = {{"converged", r.converged}, {"iterations", r.iterations}, {"residual", num(r.residual)}};
  return j;
}

inline std::string fmt(double x) {
  if (std::isnan(x)) return "nan";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.10g", x);
  return buf;
}

inline std::string csv_field(std::string s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char ch : s) {
    if (ch == '"') out += '"';
    out += ch;
  }
  return out + "\"";
}

inline const char* kRunCsvHeader =
    "run_index,grid_index,seed_index,ensemble,n,m,alpha,degree,model,lambda,delta,kappa,weights,obs_kind,rho,t_obs,"
    "algorithm,init,edges,T,sources,sensors,status,O,MO,O_rnd,rescaled_overlap,SE,MSE,R_SE,R_MSE,phi_rs,phi_info,"
    "converged,iterations,residual,atypical";

inline std::string csv_row(const RunRecord& r) {
  const auto& c = r.config;
  std::ostringstream os;
  const double alpha = r.m ? static_cast<double>(r.n) / static_cast<double>(r.m) : NAN;
  os << r.run_index << ',' << r.grid_index << ',' << r.seed_index << ',' << to_string(c.ensemble) << ',' << r.n << ','
     << r.m << ',' << fmt(alpha) << ',' << fmt(c.degree) << ',' << to_string(c.model) << ',' << fmt(c.lambda) << ','
     << c.delta << ',' << fmt(c.kappa) << ',' << to_string(c.weights) << ',' << to_string(c.obs_kind) << ','
     << fmt(c.rho) << ',' << c.t_obs << ',' << to_string(c.algorithm) << ',' << to_string(c.init) << ',' << r.edges
     << ',' << r.T << ',' << r.n_sources << ',' << r.n_sensors << ',' << csv_field(r.status) << ','
     << fmt(r.overlap) << ',' << fmt(r.mean_overlap) << ',' << fmt(r.overlap_rnd) << ',' << fmt(r.rescaled) << ','
     << fmt(r.se) << ',' << fmt(r.mse) << ',' << fmt(r.r_se) << ',' << fmt(r.r_mse) << ',' << fmt(r.phi_rs) << ','
     << fmt(r.phi_info) << ',' << (r.converged ? 1 : 0) << ',' << r.iterations << ',' << fmt(r.residual) << ','
     << (r.atypical ? 1 : 0);
  return os.str();
}

// A run to execute: configuration plus its coordinates in the sweep.
struct Job {
  RunConfig config;
  std::size_t grid_index = 0;
  std::size_t seed_index = 0;
};

// Executes jobs on a worker pool. Jobs sharing an instance run on the same
// worker so the instance and its baseline are built once. Records come back
// in job order whatever the scheduling.
inline std::vector<RunRecord> execute_jobs(const std::vector<Job>& jobs, std::uint64_t master_seed,
                                           unsigned workers = 0,
                                           const std::function<void(const RunRecord&)>& on_done = {}) {
  std::vector<std::uint64_t> keys(jobs.size());
  for (std::size_t k = 0; k < jobs.size(); ++k) keys[k] = instance_seed(jobs[k].config, master_seed, jobs[k].seed_index);
  std::vector<std::size_t> order(jobs.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return keys[a] < keys[b]; });
  std::vector<std::pair<std::size_t, std::size_t>> groups;  // [begin, end) in order
  for (std::size_t k = 0; k < order.size();) {
    std::size_t e = k;
    while (e < order.size() && keys[order[e]] == keys[order[k]]) ++e;
    groups.emplace_back(k, e);
    k = e;
  }

  std::vector<RunRecord> records(jobs.size());
  std::atomic<std::size_t> next{0};
  std::mutex done_mutex;
  auto worker = [&] {
    for (;;) {
      const std::size_t gi = next.fetch_add(1);
      if (gi >= groups.size()) return;
      const auto [b, e] = groups[gi];
      std::shared_ptr<Instance> inst;
      std::string build_error;
      try {
        inst = build_instance(jobs[order[b]].config, keys[order[b]]);
      } catch (const std::exception& ex) {
        build_error = ex.what();
      }
      std::map<std::string, RunResult> baselines;
      for (std::size_t k = b; k < e; ++k) {
        const std::size_t idx = order[k];
        RunRecord rec;
        if (inst) {
          try {
            rec = execute_run(jobs[idx].config, *inst, baselines);
          } catch (const std::exception& ex) {
            rec = RunRecord{};
            rec.config = jobs[idx].config;
            rec.status = std::string("error: ") + ex.what();
          }
        } else {
          rec.config = jobs[idx].config;
          rec.status = "error: " + build_error;
        }
        rec.run_index = idx;
        rec.grid_index = jobs[idx].grid_index;
        rec.seed_index = jobs[idx].seed_index;
        records[idx] = std::move(rec);
        if (on_done) {
          std::lock_guard lock(done_mutex);
          on_done(records[idx]);
        }
      }
    }
  };
  if (workers == 0) workers = std::max(1u, std::thread::hardware_concurrency());
  workers = static_cast<unsigned>(std::min<std::size_t>(workers, std::max<std::size_t>(groups.size(), 1)));
  if (workers <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (unsigned w = 0; w < workers; ++w) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  return records;
}

// Sets the value at a dotted path ("observations.rho") inside a JSON object.
inline void set_path(json& j, const std::string& path, const json& value) {
  json* cur = &j;
  std::size_t start = 0;
  for (;;) {
    const auto dot = path.find('.', start);
    const std::string key = path.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
    if (key.empty()) throw std::invalid_argument("bad config path '" + path + "'");
    if (dot == std::string::npos) {
      (*cur)[key] = value;
      return;
    }
    cur = &(*cur)[key];
    start = dot + 1;
  }
}

struct SweepAxis {
  std::string path;
  std::vector<json> values;
};

struct SweepSpec {
  json base;
  std::vector<SweepAxis> axes;
  std::size_t seeds = 1;
  std::uint64_t master_seed = 1;
  std::string output_dir = "out";
  unsigned workers = 0;
  bool write_runs = true;        // one JSON document per run
  bool exclude_atypical = false;  // drop tagged runs from the summary

  std::size_t grid_size() const {
    std::size_t n = 1;
    for (const auto& a : axes) n *= a.values.size();
    return n;
  }
};

inline SweepSpec sweep_spec_from_json(const json& j) {
  SweepSpec s;
  s.base = j.value("base", json::object());
  if (j.contains("axes"))
    for (const auto& a : j.at("axes")) {
      SweepAxis ax;
      ax.path = a.at("path").get<std::string>();
      for (const auto& v : a.at("values")) ax.values.push_back(v);
      if (ax.values.empty()) throw std::invalid_argument("sweep axis '" + ax.path + "' has no values");
      s.axes.push_back(std::move(ax));
    }
  s.seeds = j.value("seeds", std::size_t{1});
  if (s.seeds == 0) throw std::invalid_argument("seeds must be positive");
  s.master_seed = j.value("master_seed", s.base.value("seed", std::uint64_t{1}));
  s.output_dir = j.value("output_dir", s.output_dir);
  s.workers = j.value("workers", 0u);
  s.write_runs = j.value("write_runs", true);
  s.exclude_atypical = j.value("exclude_atypical", false);
  return s;
}

// Grid points in row-major order over the axes (last axis fastest).
inline std::vector<json> expand_grid(const SweepSpec& s, std::vector<std::vector<json>>* coords = nullptr) {
  std::vector<json> out;
  const std::size_t total = s.grid_size();
  for (std::size_t g = 0; g < total; ++g) {
    json cfg = s.base;
    std::vector<json> at(s.axes.size());
    std::size_t rem = g;
    for (std::size_t a = s.axes.size(); a-- > 0;) {
      const auto& ax = s.axes[a];
      at[a] = ax.values[rem % ax.values.size()];
      rem /= ax.values.size();
      set_path(cfg, ax.path, at[a]);
    }
    out.push_back(std::move(cfg));
    if (coords) coords->push_back(std::move(at));
  }
  return out;
}

inline std::vector<Job> sweep_jobs(const SweepSpec& s) {
  std::vector<Job> jobs;
  const auto grid = expand_grid(s);
  for (std::size_t g = 0; g < grid.size(); ++g) {
    RunConfig c = run_config_from_json(grid[g]);
    c.seed = s.master_seed;
    validate(c);
    for (std::size_t k = 0; k < s.seeds; ++k) jobs.push_back({c, g, k});
  }
  return jobs;
}

struct SummaryRow {
  std::size_t grid_index = 0;
  std::vector<json> coords;
  std::size_t runs = 0, ok = 0, converged = 0, atypical = 0, perfect = 0;
  SampleStats overlap, mean_overlap, rescaled, r_se, r_mse, phi_rs, phi_info, gap;
};

inline std::vector<SummaryRow> summarize(const SweepSpec& s, const std::vector<RunRecord>& records) {
  std::vector<std::vector<json>> coords;
  expand_grid(s, &coords);
  std::vector<SummaryRow> rows(coords.size());
  for (std::size_t g = 0; g < rows.size(); ++g) {
    rows[g].grid_index = g;
    rows[g].coords = coords[g];
  }
  struct Acc {
    std::vector<double> o, mo, res, rse, rmse, phi, phi_info, gap;
  };
  std::vector<Acc> acc(rows.size());
  for (const auto& r : records) {
    auto& row = rows[r.grid_index];
    ++row.runs;
    if (r.atypical) ++row.atypical;
    if (!std::isfinite(r.overlap)) continue;
    ++row.ok;
    if (r.converged) ++row.converged;
    if (r.overlap >= 1.0) ++row.perfect;
    if (s.exclude_atypical && r.atypical) continue;
    auto& a = acc[r.grid_index];
    a.o.push_back(r.overlap);
    a.mo.push_back(r.mean_overlap);
    a.res.push_back(r.rescaled);
    a.rse.push_back(r.r_se);
    a.rmse.push_back(r.r_mse);
    a.phi.push_back(r.phi_rs);
    a.phi_info.push_back(r.phi_info);
    a.gap.push_back(r.overlap - r.mean_overlap);
  }
  for (std::size_t g = 0; g < rows.size(); ++g) {
    rows[g].overlap = sample_stats(acc[g].o);
    rows[g].mean_overlap = sample_stats(acc[g].mo);
    rows[g].rescaled = sample_stats(acc[g].res);
    rows[g].r_se = sample_stats(acc[g].rse);
    rows[g].r_mse = sample_stats(acc[g].rmse);
    rows[g].phi_rs = sample_stats(acc[g].phi);
    rows[g].phi_info = sample_stats(acc[g].phi_info);
    rows[g].gap = sample_stats(acc[g].gap);
  }
  return rows;
}

inline std::string summary_csv(const SweepSpec& s, const std::vector<SummaryRow>& rows) {
  std::ostringstream os;
  os << "grid_index";
  for (const auto& a : s.axes) os << ',' << csv_field(a.path);
  os << ",runs,ok,converged,atypical,perfect";
  for (const char* name : {"O", "MO", "rescaled_overlap", "R_SE", "R_MSE", "phi_rs", "phi_info", "nishimori_gap"})
    os << ',' << name << "_mean," << name << "_ci99";
  os << '\n';
  for (const auto& r : rows) {
    os << r.grid_index;
    for (const auto& c : r.coords) os << ',' << csv_field(c.is_string() ? c.get<std::string>() : c.dump());
    os << ',' << r.runs << ',' << r.ok << ',' << r.converged << ',' << r.atypical << ',' << r.perfect;
    for (const auto* st : {&r.overlap, &r.mean_overlap, &r.rescaled, &r.r_se, &r.r_mse, &r.phi_rs, &r.phi_info, &r.gap})
      os << ',' << fmt(st->mean) << ',' << fmt(st->ci99);
    os << '\n';
  }
  return os.str();
}

struct SweepOutput {
  std::vector<RunRecord> records;
  std::vector<SummaryRow> summary;
};

inline void write_text(const std::filesystem::path& p, const std::string& text) {
  std::ofstream f(p, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write " + p.string());
  f << text;
}

// Runs every grid point and seed, then writes runs.csv, summary.csv and
// optionally runs/<index>.json into the output directory.
inline SweepOutput run_sweep(const SweepSpec& s, const std::function<void(const RunRecord&)>& on_done = {}) {
  SweepOutput out;
  out.records = execute_jobs(sweep_jobs(s), s.master_seed, s.workers, on_done);
  out.summary = summarize(s, out.records);
  if (s.output_dir.empty()) return out;
  namespace fs = std::filesystem;
  const fs::path dir(s.output_dir);
  fs::create_directories(dir);
  std::ostringstream runs;
  runs << kRunCsvHeader << '\n';
  for (const auto& r : out.records) runs << csv_row(r) << '\n';
  write_text(dir / "runs.csv", runs.str());
  write_text(dir / "summary.csv", summary_csv(s, out.summary));
  if (s.write_runs) {
    fs::create_directories(dir / "runs");
    for (const auto& r : out.records) {
      char name[32];
      std::snprintf(name, sizeof name, "%06zu.json", r.run_index);
      write_text(dir / "runs" / name, to_json(r).dump(2) + "\n");
    }
  }
  return out;
}

// Sensor-density scan at each (alpha, lambda, kappa): random and informed
// initializations on shared instances, followed by threshold location.
struct TransitionScanSpec {
  json base;
  std::vector<double> alphas, lambdas, kappas, rho_grid;
  std::size_t seeds = 1;
  std::uint64_t master_seed = 1;
  double resolution = 0.01;
  bool bisect = true;
  std::string output_dir = "out";
  unsigned workers = 0;
};

inline TransitionScanSpec transition_spec_from_json(const json& j) {
  TransitionScanSpec s;
  s.base = j.value("base", json::object());
  const RunConfig c = run_config_from_json(s.base);
  s.alphas = j.value("alphas", std::vector<double>{c.alpha});
  s.lambdas = j.value("lambdas", std::vector<double>{c.lambda});
  s.kappas = j.value("kappas", std::vector<double>{c.kappa});
  s.rho_grid = j.value("rho_grid", std::vector<double>{});
  if (s.rho_grid.empty()) throw std::invalid_argument("rho_grid must be nonempty");
  std::sort(s.rho_grid.begin(), s.rho_grid.end());
  s.seeds = j.value("seeds", std::size_t{1});
  s.master_seed = j.value("master_seed", s.base.value("seed", std::uint64_t{1}));
  s.resolution = j.value("resolution", s.resolution);
  s.bisect = j.value("bisect", true);
  s.output_dir = j.value("output_dir", s.output_dir);
  s.workers = j.value("workers", 0u);
  return s;
}

struct TransitionRow {
  double alpha = 0, lambda = 0, kappa = 0;
  double phi_info = NAN;
  Thresholds thresholds;
  std::vector<ScanPoint> points;
};

// Averages over seeds at one rho for both initializations.
inline ScanPoint evaluate_scan_point(const RunConfig& base, double rho, std::size_t seeds, std::uint64_t master,
                                     unsigned workers, double* phi_info = nullptr) {
  std::vector<Job> jobs;
  for (InitMode init : {InitMode::Random, InitMode::Informed}) {
    RunConfig c = base;
    c.rho = rho;
    c.init = init;
    for (std::size_t k = 0; k < seeds; ++k) jobs.push_back({c, 0, k});
  }
  const auto recs = execute_jobs(jobs, master, workers);
  ScanPoint p;
  p.rho = rho;
  std::vector<double> or_, oi, pr, pi, info;
  double perfect = 0.0, counted = 0.0;
  for (const auto& r : recs) {
    if (!std::isfinite(r.overlap)) continue;
    if (r.config.init == InitMode::Random) {
      or_.push_back(r.overlap);
      pr.push_back(r.phi_rs);
      perfect += r.overlap >= 1.0 ? 1.0 : 0.0;
      counted += 1.0;
    } else {
      oi.push_back(r.overlap);
      pi.push_back(r.phi_rs);
    }
    info.push_back(r.phi_info);
  }
  p.overlap_random = sample_stats(or_).mean;
  p.overlap_informed = sample_stats(oi).mean;
  p.phi_random = sample_stats(pr).mean;
  p.phi_informed = sample_stats(pi).mean;
  p.perfect_fraction = counted > 0 ? perfect / counted : 0.0;
  if (phi_info) *phi_info = sample_stats(info).mean;
  return p;
}

inline TransitionRow scan_transition_point(const TransitionScanSpec& s, double alpha, double lambda, double kappa) {
  RunConfig base = run_config_from_json(s.base);
  base.alpha = alpha;
  base.lambda = lambda;
  base.kappa = kappa;
  base.obs_kind = ObservationKind::Sensors;
  base.algorithm = Algorithm::BpAmp;
  TransitionRow row;
  row.alpha = alpha;
  row.lambda = lambda;
  row.kappa = kappa;
  std::vector<double> infos;
  for (double rho : s.rho_grid) {
    double info = NAN;
    row.points.push_back(evaluate_scan_point(base, rho, s.seeds, s.master_seed, s.workers, &info));
    if (std::isfinite(info)) infos.push_back(info);
  }
  row.phi_info = sample_stats(infos).mean;
  std::function<ScanPoint(double)> eval;
  if (s.bisect) eval = [&](double rho) { return evaluate_scan_point(base, rho, s.seeds, s.master_seed, s.workers); };
  row.thresholds = locate_thresholds(row.points, row.phi_info, eval, s.resolution);
  return row;
}

inline std::string thresholds_csv(const std::vector<TransitionRow>& rows) {
  std::ostringstream os;
  os << "alpha,lambda,kappa,rho_IT,rho_c\n";
  for (const auto& r : rows)
    os << fmt(r.alpha) << ',' << fmt(r.lambda) << ',' << fmt(r.kappa) << ','
       << (r.thresholds.rho_it ? fmt(*r.thresholds.rho_it) : "") << ','
       << (r.thresholds.rho_c ? fmt(*r.thresholds.rho_c) : "") << '\n';
  return os.str();
}

inline std::string scan_points_csv(const std::vector<TransitionRow>& rows) {
  std::ostringstream os;
  os << "alpha,lambda,kappa,rho,O_random,O_informed,phi_random,phi_informed,phi_info,perfect_fraction\n";
  for (const auto& r : rows)
    for (const auto& p : r.points)
      os << fmt(r.alpha) << ',' << fmt(r.lambda) << ',' << fmt(r.kappa) << ',' << fmt(p.rho) << ','
         << fmt(p.overlap_random) << ',' << fmt(p.overlap_informed) << ',' << fmt(p.phi_random) << ','
         << fmt(p.phi_informed) << ',' << fmt(r.phi_info) << ',' << fmt(p.perfect_fraction) << '\n';
  return os.str();
}

inline std::vector<TransitionRow> run_transition_scan(const TransitionScanSpec& s) {
  std::vector<TransitionRow> rows;
  for (double a : s.alphas)
    for (double l : s.lambdas)
      for (double k : s.kappas) rows.push_back(scan_transition_point(s, a, l, k));
  if (!s.output_dir.empty()) {
    std::filesystem::create_directories(s.output_dir);
    write_text(std::filesystem::path(s.output_dir) / "thresholds.csv", thresholds_csv(rows));
    write_text(std::filesystem::path(s.output_dir) / "scan_points.csv", scan_points_csv(rows));
  }
  return rows;
}

}  // namespace nss
