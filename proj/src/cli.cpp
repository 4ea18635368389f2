#include "feel/cli.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <ostream>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"

#include "feel/config.hpp"
#include "feel/cpu_optimizer.hpp"
#include "feel/error.hpp"
#include "feel/gpu_optimizer.hpp"
#include "feel/oracle.hpp"
#include "feel/simulator.hpp"

namespace feel::cli {

namespace {

using nlohmann::ordered_json;

std::string fmt(const char* pattern, double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, pattern, x);
  return buf;
}

ordered_json num(double x) { return std::isfinite(x) ? ordered_json(x) : ordered_json(); }

void write_file(const std::string& path, const std::string& body) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw ConfigError("cannot write " + path);
  f << body;
}

sim::Mode parse_mode(const std::string& m) {
  if (m == "cpu") return sim::Mode::Cpu;
  if (m == "gpu") return sim::Mode::Gpu;
  throw ConfigError("--mode must be cpu or gpu, got '" + m + "'");
}

struct Planned {
  RoundPlan plan;
  KktReport kkt;          // of the plan itself
  KktReport relaxed_kkt;  // continuous relaxation at the same global batch
};

Planned plan_scenario(const sim::ScenarioConfig& cfg, double global_batch) {
  const sim::Fleet fleet = sim::generate_scenario(cfg, 0);
  SolveOptions relaxed = cfg.solve;
  relaxed.rounding = BatchRounding::Continuous;
  Planned p;
  if (cfg.mode == sim::Mode::Cpu) {
    const CpuInstance inst = sim::cpu_instance(cfg, fleet, fleet.rates);
    p.plan = global_batch > 0.0 ? cpu::plan_at_batch(inst, global_batch, cfg.solve)
                                : cpu::optimize_round(inst, cfg.solve);
    p.kkt = cpu::kkt_residuals(p.plan, inst);
    p.relaxed_kkt = cpu::kkt_residuals(
        cpu::plan_at_batch(inst, p.plan.uplink.global_batch, relaxed), inst);
  } else {
    const GpuInstance inst = sim::gpu_instance(cfg, fleet, fleet.rates);
    p.plan = global_batch > 0.0 ? gpu::plan_at_batch(inst, global_batch, cfg.solve)
                                : gpu::optimize_round_gpu(inst, cfg.solve);
    p.kkt = gpu::kkt_residuals(p.plan, inst);
    p.relaxed_kkt = gpu::kkt_residuals(
        gpu::plan_at_batch(inst, p.plan.uplink.global_batch, relaxed), inst);
  }
  return p;
}

int cmd_plan(const config::Config& c, double global_batch, const std::string& json_path,
             std::ostream& out) {
  const sim::ScenarioConfig& cfg = c.scenario;
  const Planned p = plan_scenario(cfg, global_batch);
  const sim::Fleet fleet = sim::generate_scenario(cfg, 0);
  const RoundPlan& plan = p.plan;

  out << "device  dist_km  up_Mbps  down_Mbps    batch  tauU_ms  tauD_ms  "
         "compute_s  upload_s  download_s  update_s\n";
  ordered_json devices = ordered_json::array();
  for (std::size_t k = 0; k < plan.uplink.batch.size(); ++k) {
    char line[256];
    std::snprintf(line, sizeof line,
                  "%6zu  %7.4f  %7.2f  %9.2f  %7.2f  %7.4f  %7.4f  %9.4f  %8.4f  "
                  "%10.4f  %8.4f\n",
                  k, fleet.distance_km[k], fleet.rates[k].uplink_bps / 1e6,
                  fleet.rates[k].downlink_bps / 1e6, plan.uplink.batch[k],
                  plan.uplink.slot_s[k] * 1e3, plan.downlink.slot_s[k] * 1e3,
                  plan.latency.compute_s[k], plan.latency.upload_s[k],
                  plan.latency.download_s[k], plan.latency.update_s[k]);
    out << line;
    ordered_json d;
    d["distance_km"] = fleet.distance_km[k];
    d["uplink_bps"] = fleet.rates[k].uplink_bps;
    d["downlink_bps"] = fleet.rates[k].downlink_bps;
    d["batch"] = plan.uplink.batch[k];
    d["uplink_slot_s"] = plan.uplink.slot_s[k];
    d["downlink_slot_s"] = plan.downlink.slot_s[k];
    d["compute_s"] = plan.latency.compute_s[k];
    d["upload_s"] = plan.latency.upload_s[k];
    d["download_s"] = plan.latency.download_s[k];
    d["update_s"] = plan.latency.update_s[k];
    devices.push_back(d);
  }
  out << "global batch        " << fmt("%.6g", plan.uplink.global_batch) << '\n'
      << "loss decay          " << fmt("%.6g", plan.delta_loss) << '\n'
      << "round latency (s)   " << fmt("%.6g", plan.latency.round_total_s) << '\n'
      << "  uplink period     " << fmt("%.6g", plan.latency.uplink_period_s) << '\n'
      << "  downlink period   " << fmt("%.6g", plan.latency.downlink_period_s) << '\n'
      << "efficiency (1/s)    " << fmt("%.6g", plan.efficiency) << '\n'
      << "E^U*                " << fmt("%.6g", plan.uplink.eu_star) << '\n'
      << "mu*                 " << fmt("%.6g", plan.uplink.mu_star)
      << (plan.uplink.degenerate ? "  (every batch at a bound)" : "") << '\n'
      << "E^D*                " << fmt("%.6g", plan.downlink.ed_star) << '\n'
      << "KKT max residual    " << fmt("%.3e", p.kkt.max_abs_residual) << '\n'
      << "  relaxed at this B " << fmt("%.3e", p.relaxed_kkt.max_abs_residual) << '\n';

  ordered_json doc;
  doc["mode"] = cfg.mode == sim::Mode::Cpu ? "cpu" : "gpu";
  doc["global_batch"] = plan.uplink.global_batch;
  doc["delta_loss"] = plan.delta_loss;
  doc["round_latency_s"] = plan.latency.round_total_s;
  doc["uplink_period_s"] = plan.latency.uplink_period_s;
  doc["downlink_period_s"] = plan.latency.downlink_period_s;
  doc["efficiency"] = plan.efficiency;
  doc["eu_star"] = plan.uplink.eu_star;
  doc["mu_star"] = num(plan.uplink.mu_star);
  doc["degenerate"] = plan.uplink.degenerate;
  doc["ed_star"] = plan.downlink.ed_star;
  doc["kkt_max_residual"] = num(p.kkt.max_abs_residual);
  doc["kkt_max_residual_relaxed"] = num(p.relaxed_kkt.max_abs_residual);
  doc["devices"] = devices;
  const std::string path = json_path.empty() ? c.output.plan_json : json_path;
  write_file(path, doc.dump(2) + "\n");
  out << "plan written to " << path << '\n';
  return kSuccess;
}

int cmd_simulate(config::Config c, const std::string& schemes_arg, std::ostream& out) {
  std::vector<sim::Scheme> schemes;
  if (schemes_arg.empty()) {
    schemes = sim::all_schemes();
  } else {
    std::istringstream in(schemes_arg);
    std::string name;
    while (std::getline(in, name, ',')) {
      try {
        schemes.push_back(sim::parse_scheme(name));
      } catch (const InvalidArgument& e) {
        throw ConfigError(std::string("--schemes: ") + e.what());
      }
    }
  }
  if (schemes.empty()) throw ConfigError("--schemes: empty list");
  try {
    sim::validate(c.scenario);
  } catch (const InvalidArgument& e) {
    throw ConfigError(e.what());
  }
  const sim::SimResult r = sim::run_schemes(c.scenario, schemes);

  std::ostringstream csv, json;
  sim::write_csv(csv, r);
  sim::write_json(json, r, c.scenario);
  write_file(c.output.rounds_csv, csv.str());
  write_file(c.output.summary_json, json.str());

  out << "scheme            time_to_target_s  speedup  final_loss  mean_eff\n";
  for (std::size_t i = 0; i < r.schemes.size(); ++i) {
    const sim::SchemeSummary m = sim::mean_summary(r, i);
    char line[160];
    std::snprintf(line, sizeof line, "%-16s  %16.4f  %7.4f  %10.5f  %8.3e\n",
                  sim::to_string(m.scheme).c_str(), m.time_to_target_s, m.speedup,
                  m.final_loss, m.mean_efficiency);
    out << line;
  }
  out << "target loss " << fmt("%.6g", r.target_loss) << ", reference "
      << sim::to_string(c.scenario.reference) << ", dominance violations "
      << r.dominance_violations << '\n'
      << "rounds written to " << c.output.rounds_csv << ", summary to "
      << c.output.summary_json << '\n';
  return kSuccess;
}

int cmd_fit(const std::string& path, double gpu_flops, std::ostream& out) {
  std::ifstream in(path);
  if (!in) throw ConfigError(path + ": cannot open samples file");
  const auto samples = gpu::read_fit_samples(in);
  const latency::GpuProfile p = gpu::fit_gpu_profile(samples, gpu_flops);
  out << "samples               " << samples.size() << '\n'
      << "flat_latency_ms       " << fmt("%.9g", p.flat_latency_s * 1e3) << '\n'
      << "slope_ms_per_sample   " << fmt("%.9g", p.slope_s_per_sample * 1e3) << '\n'
      << "threshold_batch       " << fmt("%.9g", p.threshold_batch) << '\n'
      << "residual_sum_squares  " << fmt("%.6e", gpu::fit_rss(p, samples)) << '\n';
  return kSuccess;
}

int cmd_verify(const config::Config& c, std::size_t levels, unsigned long long cap,
               std::ostream& out) {
  const sim::ScenarioConfig& cfg = c.scenario;
  const sim::Fleet fleet = sim::generate_scenario(cfg, 0);
  oracle::GridSpec spec;
  spec.slot_levels = levels;
  spec.max_points = cap;
  RoundPlan plan;
  oracle::OracleResult best;
  oracle::Comparison cmp;
  if (cfg.mode == sim::Mode::Cpu) {
    const CpuInstance inst = sim::cpu_instance(cfg, fleet, fleet.rates);
    // Size check first so an oversized grid fails before any solving.
    best = oracle::grid_search(inst, spec);
    plan = cpu::optimize_round(inst, cfg.solve);
    cmp = oracle::compare(plan, best, inst, spec);
  } else {
    const GpuInstance inst = sim::gpu_instance(cfg, fleet, fleet.rates);
    best = oracle::grid_search(inst, spec);
    plan = gpu::optimize_round_gpu(inst, cfg.solve);
    cmp = oracle::compare(plan, best, inst, spec);
  }
  const bool within = cmp.gap <= 1e-3;
  const bool consistent =
      cmp.gap >= -(cmp.grid_step_bound * plan.efficiency / best.efficiency) - 1e-12;
  auto batches = [](const RoundPlan& p) {
    std::string s;
    for (double b : p.uplink.batch) s += (s.empty() ? "" : ",") + fmt("%g", b);
    return s;
  };
  out << "grid points        " << best.points << '\n'
      << "oracle efficiency  " << fmt("%.9g", best.efficiency) << "  batches "
      << batches(best.plan) << '\n'
      << "plan efficiency    " << fmt("%.9g", plan.efficiency) << "  batches "
      << batches(plan) << '\n'
      << "gap                " << fmt("%.3e", cmp.gap) << '\n'
      << "grid step bound    " << fmt("%.3e", cmp.grid_step_bound) << '\n'
      << "plan feasible      " << (cmp.plan_feasible ? "yes" : "no") << '\n'
      << "oracle feasible    " << (cmp.oracle_feasible ? "yes" : "no") << '\n';
  for (const auto& v : cmp.violations) out << "  violation: " << v << '\n';
  const bool ok = within && consistent && cmp.plan_feasible && cmp.oracle_feasible;
  out << "verdict            " << (ok ? "PASS" : "FAIL") << '\n';
  return ok ? kSuccess : kRuntimeError;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Round planning and simulation for federated edge learning"};
  app.require_subcommand(1);

  std::string config_path, mode, json_path, schemes, samples_path;
  double global_batch = 0.0, gpu_flops = latency::GpuProfile{}.gpu_flops;
  long long rounds = -1, trials = -1, seed = -1;
  std::size_t levels = 64;
  unsigned long long cap = oracle::GridSpec{}.max_points;

  CLI::App* plan = app.add_subcommand("plan", "Optimal batches and slots for one round");
  plan->add_option("config", config_path, "Config file")->required();
  plan->add_option("--global-batch", global_batch, "Fix the global batch");
  plan->add_option("--mode", mode, "cpu or gpu (overrides the config)");
  plan->add_option("--json", json_path, "Plan output path");

  CLI::App* simulate = app.add_subcommand("simulate", "Multi-round scheme comparison");
  simulate->add_option("config", config_path, "Config file")->required();
  simulate->add_option("--schemes", schemes, "Comma-separated scheme names");
  CLI::Option* rounds_opt = simulate->add_option("--rounds", rounds, "Rounds per trial");
  CLI::Option* trials_opt = simulate->add_option("--trials", trials, "Independent trials");
  CLI::Option* seed_opt = simulate->add_option("--seed", seed, "Master seed");
  simulate->add_option("--mode", mode, "cpu or gpu (overrides the config)");

  CLI::App* fit = app.add_subcommand("fit-gpu", "Fit a GPU latency profile");
  fit->add_option("samples", samples_path, "Two-column (batch, latency_s) file")
      ->required();
  fit->add_option("--gpu-flops", gpu_flops, "Copied into the fitted profile");

  CLI::App* verify = app.add_subcommand("verify", "Check the planner against a grid oracle");
  verify->add_option("config", config_path, "Config file")->required();
  verify->add_option("--grid", levels, "Slot levels per frame")->check(CLI::PositiveNumber);
  verify->add_option("--max-points", cap, "Grid size cap");
  verify->add_option("--mode", mode, "cpu or gpu (overrides the config)");

  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kSuccess : kUsageError;
  }

  try {
    if (fit->parsed()) return cmd_fit(samples_path, gpu_flops, out);

    config::Config c = config::load(config_path);
    if (!mode.empty()) c.scenario.mode = parse_mode(mode);
    if (plan->parsed()) return cmd_plan(c, global_batch, json_path, out);
    if (simulate->parsed()) {
      if ((rounds_opt->count() && rounds <= 0) || (trials_opt->count() && trials <= 0)) {
        throw ConfigError("--rounds and --trials must be positive");
      }
      if (seed_opt->count() && seed < 0) throw ConfigError("--seed must be non-negative");
      if (rounds_opt->count()) c.scenario.rounds = static_cast<std::size_t>(rounds);
      if (trials_opt->count()) c.scenario.trials = static_cast<std::size_t>(trials);
      if (seed_opt->count()) c.scenario.master_seed = static_cast<std::uint64_t>(seed);
      return cmd_simulate(c, schemes, out);
    }
    return cmd_verify(c, levels, cap, out);
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << '\n';
    return kUsageError;
  } catch (const InvalidArgument& e) {
    err << "error: " << e.what() << '\n';
    return kUsageError;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kRuntimeError;
  }
}

}  // namespace feel::cli
