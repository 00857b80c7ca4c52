#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>

#include "CLI11.hpp"
#include "json.hpp"
#include "nss/experiment.hpp"
#include "nss/validation.hpp"

namespace {

using nlohmann::json;

constexpr int kUsageError = 2;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Flags {
  std::string config;
  std::string output;
  std::optional<std::uint64_t> seed;
  std::optional<unsigned> workers;
  std::string profile = "full";
  bool quiet = false;
};

json load_config(const std::string& path) {
  if (path.empty()) throw UsageError("a config file is required (--config PATH)");
  std::ifstream f(path);
  if (!f) throw UsageError("cannot open config '" + path + "'");
  std::stringstream ss;
  ss << f.rdbuf();
  const std::string text = ss.str();
  if (text.find_first_not_of(" \t\r\n") == std::string::npos) throw UsageError("config '" + path + "' is empty");
  json j = json::parse(text, nullptr, true, true);
  if (!j.is_object()) throw UsageError("config must be a JSON object");
  return j;
}

// The small profile caps the network at 2000 nodes for quick runs.
void apply_profile(json& base, const std::string& profile) {
  if (profile == "full") return;
  if (profile != "small") throw UsageError("unknown profile '" + profile + "' (full or small)");
  base["graph"]["n"] = std::min<std::size_t>(base["graph"].value("n", std::size_t{2000}), 2000);
  if (base.contains("prior")) base["prior"].erase("nm_product");
}

void progress(const nss::RunRecord& r, std::size_t total, std::size_t& done, bool quiet) {
  ++done;
  if (quiet) return;
  std::cerr << "[" << done << "/" << total << "] grid " << r.grid_index << " seed " << r.seed_index << "  O="
            << nss::fmt(r.overlap) << " phi=" << nss::fmt(r.phi_rs) << "  " << r.status << "\n";
}

int cmd_sweep(const Flags& fl) {
  json j = load_config(fl.config);
  if (!j.contains("base")) throw UsageError("sweep config needs a 'base' run config");
  apply_profile(j["base"], fl.profile);
  auto spec = nss::sweep_spec_from_json(j);
  if (fl.seed) spec.master_seed = *fl.seed;
  if (fl.workers) spec.workers = *fl.workers;
  if (!fl.output.empty()) spec.output_dir = fl.output;
  const std::size_t total = spec.grid_size() * spec.seeds;
  std::size_t done = 0;
  const auto out = nss::run_sweep(spec, [&](const nss::RunRecord& r) { progress(r, total, done, fl.quiet); });
  std::cout << nss::summary_csv(spec, out.summary);
  std::cerr << "wrote " << out.records.size() << " runs to " << spec.output_dir << "\n";
  return 0;
}

int cmd_scan(const Flags& fl) {
  json j = load_config(fl.config);
  if (!j.contains("base")) throw UsageError("scan config needs a 'base' run config");
  apply_profile(j["base"], fl.profile);
  auto spec = nss::transition_spec_from_json(j);
  if (fl.seed) spec.master_seed = *fl.seed;
  if (fl.workers) spec.workers = *fl.workers;
  if (!fl.output.empty()) spec.output_dir = fl.output;
  const auto rows = nss::run_transition_scan(spec);
  std::cout << nss::thresholds_csv(rows);
  return 0;
}

int cmd_validate(const Flags& fl) {
  const json j = load_config(fl.config);
  auto spec = nss::validation_spec_from_json(j);
  if (fl.seed) spec.seed = *fl.seed;
  const auto checks = nss::run_validation(spec);
  nss::print_checks(std::cout, checks);
  if (!fl.output.empty()) {
    std::filesystem::create_directories(fl.output);
    json out = json::array();
    for (const auto& c : checks)
      out.push_back({{"name", c.name}, {"pass", c.pass}, {"value", c.value}, {"tolerance", c.tolerance},
                     {"detail", c.detail}});
    nss::write_text(std::filesystem::path(fl.output) / "validation.json", out.dump(2) + "\n");
  }
  for (const auto& c : checks)
    if (!c.pass) return 1;
  return 0;
}

int cmd_single(const Flags& fl) {
  json j = load_config(fl.config);
  apply_profile(j, fl.profile);
  nss::RunConfig c = nss::run_config_from_json(j);
  if (fl.seed) c.seed = *fl.seed;
  nss::validate(c);
  const auto seed_index = j.value("seed_index", std::uint64_t{0});
  const auto recs = nss::execute_jobs({{c, 0, seed_index}}, c.seed, 1);
  const json out = nss::to_json(recs.front());
  if (!fl.output.empty()) {
    std::filesystem::create_directories(fl.output);
    nss::write_text(std::filesystem::path(fl.output) / "run.json", out.dump(2) + "\n");
  }
  std::cout << out.dump(2) << "\n";
  return recs.front().status.rfind("error", 0) == 0 ? 1 : 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Source inference on networks with a perceptron prior on the initial state"};
  app.require_subcommand(1);
  Flags fl;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("-c,--config", fl.config, "JSON config file");
    sub->add_option("-o,--output", fl.output, "output directory");
    sub->add_option("-s,--seed", fl.seed, "master seed override");
    sub->add_option("-w,--workers", fl.workers, "worker threads (default: hardware concurrency)");
    sub->add_option("-p,--profile", fl.profile, "full or small (N capped at 2000)");
    sub->add_flag("-q,--quiet", fl.quiet, "no per-run progress");
  };
  auto* sweep = app.add_subcommand("sweep", "grid sweep over run-config axes");
  auto* scan = app.add_subcommand("scan-transition", "random vs informed scan over sensor density");
  auto* val = app.add_subcommand("validate", "exact-enumeration checks on small trees");
  auto* single = app.add_subcommand("single-run", "one run, record printed as JSON");
  for (auto* s : {sweep, scan, val, single}) add_common(s);
  CLI11_PARSE(app, argc, argv);

  try {
    if (sweep->parsed()) return cmd_sweep(fl);
    if (scan->parsed()) return cmd_scan(fl);
    if (val->parsed()) return cmd_validate(fl);
    if (single->parsed()) return cmd_single(fl);
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n" << app.help();
    return kUsageError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return kUsageError;
}
