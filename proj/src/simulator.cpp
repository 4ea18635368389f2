#include "feel/simulator.hpp"

#include <algorithm>
#include <atomic>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <exception>
#include <limits>
#include <ostream>
#include <random>
#include <thread>

#include "json.hpp"

#include "feel/cpu_optimizer.hpp"
#include "feel/error.hpp"
#include "feel/gpu_optimizer.hpp"
#include "feel/loss.hpp"

namespace feel::sim {

namespace {

// Substream tags, mixed into derive_seed after (master_seed, trial[, round]).
constexpr std::uint64_t kPlacementTag = 0x706c6163;
constexpr std::uint64_t kChannelTag = 0x6368616e;
constexpr std::uint64_t kRandomBatchTag = 0x72616e64;
constexpr std::uint64_t kNoiseTag = 0x6e6f6973;

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

template <class T>
const T& blockwise(const std::vector<T>& mix, std::size_t k, std::size_t count) {
  const std::size_t block = (count + mix.size() - 1) / mix.size();
  return mix[std::min(k / block, mix.size() - 1)];
}

RoundPlan optimal_plan(const ScenarioConfig& cfg, const Fleet& fleet,
                       const std::vector<channel::RateEstimate>& rates) {
  if (cfg.mode == Mode::Cpu) {
    return cpu::optimize_round(cpu_instance(cfg, fleet, rates), cfg.solve);
  }
  return gpu::optimize_round_gpu(gpu_instance(cfg, fleet, rates), cfg.solve);
}

RoundPlan fixed_plan(const ScenarioConfig& cfg, const Fleet& fleet,
                     const std::vector<channel::RateEstimate>& rates,
                     const std::vector<double>& batches, SlotPolicy policy) {
  if (cfg.mode == Mode::Cpu) {
    return cpu::plan_for_batches(cpu_instance(cfg, fleet, rates), batches, policy,
                                 cfg.solve.tol);
  }
  return gpu::plan_for_batches(gpu_instance(cfg, fleet, rates), batches, policy,
                               cfg.solve.tol);
}

RoundPlan scheme_plan(const ScenarioConfig& cfg, Scheme scheme,
                      const Fleet& fleet,
                      const std::vector<channel::RateEstimate>& rates,
                      std::size_t trial, std::size_t round) {
  const std::size_t k = fleet.distance_km.size();
  const double bmax = std::floor(cfg.max_batch);
  switch (scheme) {
    case Scheme::Proposed:
      return optimal_plan(cfg, fleet, rates);
    case Scheme::Online:
      return fixed_plan(cfg, fleet, rates, std::vector<double>(k, 1.0),
                        cfg.baseline_slots);
    case Scheme::FullBatch:
      return fixed_plan(cfg, fleet, rates, std::vector<double>(k, bmax),
                        cfg.baseline_slots);
    case Scheme::RandomBatch: {
      std::mt19937_64 rng(
          channel::derive_seed({cfg.master_seed, trial, round, kRandomBatchTag}));
      std::uniform_int_distribution<long long> pick(1, static_cast<long long>(bmax));
      std::vector<double> b(k);
      for (double& x : b) x = static_cast<double>(pick(rng));
      return fixed_plan(cfg, fleet, rates, b, cfg.baseline_slots);
    }
    case Scheme::EqualAllocation: {
      // The proposed global batch, split as evenly as integers allow, with
      // equal slots.
      const RoundPlan best = optimal_plan(cfg, fleet, rates);
      const long long total = std::llround(best.uplink.global_batch);
      const long long n = static_cast<long long>(k);
      std::vector<double> b(k, static_cast<double>(total / n));
      for (long long i = 0; i < total % n; ++i) b[static_cast<std::size_t>(i)] += 1.0;
      return fixed_plan(cfg, fleet, rates, b, SlotPolicy::Equal);
    }
  }
  throw InvalidArgument("unknown scheme");
}

double whole_frame_latency(const ScenarioConfig& cfg, const RoundPlan& plan,
                           const std::vector<channel::RateEstimate>& rates) {
  const double bits = cfg.cost.gradient_bits();
  std::vector<latency::DeviceLatency> d(rates.size());
  for (std::size_t k = 0; k < rates.size(); ++k) {
    d[k].compute_s = plan.latency.compute_s[k];
    d[k].upload_s = latency::transmission_latency_whole_frames(
        bits, cfg.frames.uplink_s, plan.uplink.slot_s[k], rates[k].uplink_bps);
    d[k].download_s = latency::transmission_latency_whole_frames(
        bits, cfg.frames.downlink_s, plan.downlink.slot_s[k], rates[k].downlink_bps);
    d[k].update_s = plan.latency.update_s[k];
  }
  return latency::round_latency(d).round_total_s;
}

double target_loss_of(const ScenarioConfig& cfg) {
  return cfg.initial_loss - cfg.target_reduction * (cfg.initial_loss - cfg.floor_loss);
}

std::string format_number(double x) {
  if (!std::isfinite(x)) return std::isnan(x) ? "nan" : (x > 0 ? "inf" : "-inf");
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

std::string join(const std::vector<double>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) out += ';';
    out += format_number(v[i]);
  }
  return out;
}

std::string lower(std::string s) {
  for (char& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

}  // namespace

CpuInstance cpu_instance(const ScenarioConfig& cfg, const Fleet& fleet,
                         std::vector<channel::RateEstimate> rates) {
  CpuInstance inst;
  inst.devices = fleet.cpu;
  inst.rates = std::move(rates);
  inst.cost = cfg.cost;
  inst.frames = cfg.frames;
  inst.max_batch = cfg.max_batch;
  return inst;
}

GpuInstance gpu_instance(const ScenarioConfig& cfg, const Fleet& fleet,
                         std::vector<channel::RateEstimate> rates) {
  GpuInstance inst;
  inst.devices = fleet.gpu;
  inst.rates = std::move(rates);
  inst.cost = cfg.cost;
  inst.frames = cfg.frames;
  inst.max_batch = cfg.max_batch;
  return inst;
}

std::string to_string(Scheme s) {
  switch (s) {
    case Scheme::Proposed: return "proposed";
    case Scheme::Online: return "online";
    case Scheme::FullBatch: return "fullbatch";
    case Scheme::RandomBatch: return "randombatch";
    case Scheme::EqualAllocation: return "equalallocation";
  }
  return "unknown";
}

Scheme parse_scheme(const std::string& name) {
  const std::string n = lower(name);
  if (n == "proposed") return Scheme::Proposed;
  if (n == "online") return Scheme::Online;
  if (n == "fullbatch" || n == "full") return Scheme::FullBatch;
  if (n == "randombatch" || n == "random") return Scheme::RandomBatch;
  if (n == "equalallocation" || n == "equal") return Scheme::EqualAllocation;
  throw InvalidArgument("unknown scheme '" + name + "'");
}

std::vector<Scheme> all_schemes() {
  return {Scheme::Proposed, Scheme::Online, Scheme::FullBatch, Scheme::RandomBatch,
          Scheme::EqualAllocation};
}

void validate(const ScenarioConfig& cfg) {
  const std::size_t k = cfg.device_count;
  if (k == 0) throw InvalidArgument("scenario: fleet is empty (device_count = 0)");
  if (cfg.mode == Mode::Cpu) {
    if (cfg.cpu_freq_mix_hz.empty()) throw InvalidArgument("scenario: empty cpu mix");
    for (double f : cfg.cpu_freq_mix_hz) latency::validate(latency::CpuProfile{f});
  } else {
    if (cfg.gpu_mix.empty()) throw InvalidArgument("scenario: empty gpu mix");
    for (const auto& g : cfg.gpu_mix) latency::validate(g, cfg.max_batch);
  }
  if (!(cfg.cell_radius_km > 0.0) || !(cfg.min_distance_km > 0.0) ||
      cfg.min_distance_km > cfg.cell_radius_km) {
    throw InvalidArgument("scenario: need 0 < min_distance_km <= cell_radius_km");
  }
  if (!cfg.distances_km.empty()) {
    if (cfg.distances_km.size() != k) {
      throw InvalidArgument("scenario: distances_km needs one entry per device");
    }
    for (double d : cfg.distances_km) {
      if (!(d > 0.0)) throw InvalidArgument("scenario: distances must be positive");
    }
  }
  if (!cfg.rate_override.empty()) {
    if (cfg.rate_override.size() != k) {
      throw InvalidArgument("scenario: rate override needs one entry per device");
    }
    for (const auto& r : cfg.rate_override) channel::validate(r);
  }
  channel::validate(cfg.channel);
  if (cfg.round_fading_samples == 0) {
    throw InvalidArgument("scenario: round_fading_samples must be positive");
  }
  latency::validate(cfg.cost);
  if (!(cfg.frames.uplink_s > 0.0) || !(cfg.frames.downlink_s > 0.0)) {
    throw InvalidArgument("scenario: frame lengths must be positive");
  }
  if (!(cfg.max_batch >= 1.0)) throw InvalidArgument("scenario: max_batch must be >= 1");
  loss::validate(loss::LossProxy{cfg.cost.loss_coefficient, cfg.initial_loss,
                                 cfg.floor_loss});
  if (!(cfg.loss_noise >= 0.0) || !(cfg.loss_noise < 1.0)) {
    throw InvalidArgument("scenario: loss_noise must lie in [0, 1)");
  }
  if (cfg.rounds == 0) throw InvalidArgument("scenario: rounds must be positive");
  if (cfg.trials == 0) throw InvalidArgument("scenario: trials must be positive");
  if (!(cfg.target_reduction > 0.0) || cfg.target_reduction > 1.0) {
    throw InvalidArgument("scenario: target_reduction must lie in (0, 1]");
  }
}

Fleet generate_scenario(const ScenarioConfig& cfg, std::size_t trial) {
  validate(cfg);
  const std::size_t k = cfg.device_count;
  Fleet fleet;
  std::mt19937_64 rng(channel::derive_seed({cfg.master_seed, trial, kPlacementTag}));
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (std::size_t i = 0; i < k; ++i) {
    const double radius = cfg.cell_radius_km * std::sqrt(unit(rng));
    fleet.distance_km.push_back(std::max(radius, cfg.min_distance_km));
  }
  if (!cfg.distances_km.empty()) fleet.distance_km = cfg.distances_km;
  for (std::size_t i = 0; i < k; ++i) {
    if (cfg.mode == Mode::Cpu) {
      fleet.cpu.push_back({blockwise(cfg.cpu_freq_mix_hz, i, k)});
    } else {
      fleet.gpu.push_back(blockwise(cfg.gpu_mix, i, k));
    }
  }
  if (!cfg.rate_override.empty()) {
    fleet.rates = cfg.rate_override;
    return fleet;
  }
  channel::ChannelParams p = cfg.channel;
  p.rng_seed = channel::derive_seed({cfg.master_seed, trial, 0, kChannelTag});
  for (std::size_t i = 0; i < k; ++i) {
    fleet.rates.push_back(channel::estimate_rates(
        cfg.uplink_power_dbm, cfg.downlink_power_dbm, fleet.distance_km[i], p, i));
  }
  return fleet;
}

std::vector<channel::RateEstimate> round_rates(const ScenarioConfig& cfg,
                                               const Fleet& fleet,
                                               std::size_t trial,
                                               std::size_t round) {
  if (cfg.static_channel || !cfg.rate_override.empty()) return fleet.rates;
  channel::ChannelParams p = cfg.channel;
  p.mc_samples = cfg.round_fading_samples;
  p.rng_seed = channel::derive_seed({cfg.master_seed, trial, round, kChannelTag});
  std::vector<channel::RateEstimate> out;
  for (std::size_t i = 0; i < fleet.distance_km.size(); ++i) {
    out.push_back(channel::estimate_rates(cfg.uplink_power_dbm,
                                          cfg.downlink_power_dbm,
                                          fleet.distance_km[i], p, i));
  }
  return out;
}

SchemeRun run(const ScenarioConfig& cfg, Scheme scheme, const Fleet& fleet,
              std::size_t trial) {
  validate(cfg);
  if (fleet.distance_km.size() != cfg.device_count) {
    throw InvalidArgument("run: fleet does not match the scenario");
  }
  const loss::LossProxy proxy{cfg.cost.loss_coefficient, cfg.initial_loss,
                              cfg.floor_loss};
  const double target = target_loss_of(cfg);
  SchemeRun out;
  out.scheme = scheme;
  out.trial = trial;
  double loss_now = cfg.initial_loss;
  double clock = 0.0;
  for (std::size_t n = 1; n <= cfg.rounds; ++n) {
    const auto rates = round_rates(cfg, fleet, trial, n);
    const RoundPlan plan = scheme_plan(cfg, scheme, fleet, rates, trial, n);
    RoundRecord r;
    r.round = n;
    r.global_batch = plan.uplink.global_batch;
    r.latency_s = cfg.integer_frames ? whole_frame_latency(cfg, plan, rates)
                                     : plan.latency.round_total_s;
    r.delta_loss = plan.delta_loss;
    if (cfg.loss_noise > 0.0) {
      std::mt19937_64 rng(channel::derive_seed(
          {cfg.master_seed, trial, n, static_cast<std::uint64_t>(scheme), kNoiseTag}));
      std::uniform_real_distribution<double> u(-cfg.loss_noise, cfg.loss_noise);
      r.delta_loss *= 1.0 + u(rng);
    }
    r.efficiency = loss::learning_efficiency(r.delta_loss, r.latency_s);
    clock += r.latency_s;
    r.cumulative_s = clock;
    loss_now = loss::next_loss(proxy, loss_now, r.delta_loss);
    r.loss = loss_now;
    r.batch = plan.uplink.batch;
    r.uplink_slot_s = plan.uplink.slot_s;
    r.downlink_slot_s = plan.downlink.slot_s;
    out.rounds.push_back(std::move(r));
    if (loss_now <= cfg.floor_loss) break;
    if (cfg.stop_at_target && loss_now <= target) break;
  }
  return out;
}

double time_to_loss(const SchemeRun& run, double initial_loss, double target) {
  if (initial_loss <= target) return 0.0;
  double prev_loss = initial_loss;
  double prev_t = 0.0;
  for (const RoundRecord& r : run.rounds) {
    if (prev_loss - r.delta_loss <= target) {
      return prev_t + (prev_loss - target) / r.delta_loss * r.latency_s;
    }
    prev_loss = r.loss;
    prev_t = r.cumulative_s;
  }
  return kInf;
}

std::vector<SchemeSummary> summarize(std::span<const SchemeRun> runs,
                                     Scheme reference, double initial_loss,
                                     double target_loss) {
  if (runs.empty()) throw InvalidArgument("summarize: no results");
  const SchemeRun* ref = nullptr;
  for (const SchemeRun& r : runs) {
    if (r.scheme == reference) {
      ref = &r;
      break;
    }
  }
  if (!ref) {
    throw InvalidArgument("summarize: reference scheme '" + to_string(reference) +
                          "' is not among the results");
  }
  const double t_ref = time_to_loss(*ref, initial_loss, target_loss);
  std::vector<SchemeSummary> out;
  for (const SchemeRun& r : runs) {
    SchemeSummary s;
    s.scheme = r.scheme;
    s.rounds = r.rounds.size();
    s.final_loss = r.rounds.empty() ? initial_loss : r.rounds.back().loss;
    s.time_to_target_s = time_to_loss(r, initial_loss, target_loss);
    if (&r == ref) {
      s.speedup = std::isfinite(t_ref) ? 1.0 : kNaN;
    } else if (std::isfinite(t_ref) && std::isfinite(s.time_to_target_s) &&
               s.time_to_target_s > 0.0) {
      s.speedup = t_ref / s.time_to_target_s;
    } else {
      s.speedup = kNaN;
    }
    double sum = 0.0;
    for (const RoundRecord& rec : r.rounds) sum += rec.efficiency;
    s.mean_efficiency = r.rounds.empty() ? 0.0 : sum / static_cast<double>(r.rounds.size());
    out.push_back(s);
  }
  return out;
}

SimResult run_schemes(const ScenarioConfig& cfg, std::span<const Scheme> schemes) {
  validate(cfg);
  if (schemes.empty()) throw InvalidArgument("run_schemes: no schemes requested");
  SimResult result;
  result.schemes.assign(schemes.begin(), schemes.end());
  result.target_loss = target_loss_of(cfg);
  result.runs.resize(cfg.trials);
  result.summaries.resize(cfg.trials);
  std::vector<std::size_t> violations(cfg.trials, 0);
  std::vector<std::exception_ptr> errors(cfg.trials);

  const bool has_reference =
      std::find(schemes.begin(), schemes.end(), cfg.reference) != schemes.end();
  const Scheme reference = has_reference ? cfg.reference : schemes.front();

  auto one_trial = [&](std::size_t t) {
    const Fleet fleet = generate_scenario(cfg, t);
    std::vector<SchemeRun> runs;
    for (Scheme s : schemes) runs.push_back(run(cfg, s, fleet, t));
    result.summaries[t] =
        summarize(runs, reference, cfg.initial_loss, result.target_loss);
    const auto prop = std::find_if(runs.begin(), runs.end(), [](const SchemeRun& r) {
      return r.scheme == Scheme::Proposed;
    });
    if (prop != runs.end()) {
      for (const SchemeRun& r : runs) {
        if (&r == &*prop) continue;
        const std::size_t n = std::min(r.rounds.size(), prop->rounds.size());
        for (std::size_t i = 0; i < n; ++i) {
          if (r.rounds[i].efficiency > prop->rounds[i].efficiency * (1.0 + 1e-9)) {
            ++violations[t];
          }
        }
      }
    }
    result.runs[t] = std::move(runs);
  };

  unsigned workers = cfg.threads ? cfg.threads : std::thread::hardware_concurrency();
  workers = std::max(1u, std::min<unsigned>(workers, static_cast<unsigned>(cfg.trials)));
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t t = next++; t < cfg.trials; t = next++) {
      try {
        one_trial(t);
      } catch (...) {
        errors[t] = std::current_exception();
      }
    }
  };
  std::vector<std::thread> pool;
  for (unsigned i = 1; i < workers; ++i) pool.emplace_back(worker);
  worker();
  for (auto& th : pool) th.join();
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  for (std::size_t v : violations) result.dominance_violations += v;
  return result;
}

SchemeSummary mean_summary(const SimResult& result, std::size_t scheme_index) {
  if (result.summaries.empty() || scheme_index >= result.schemes.size()) {
    throw InvalidArgument("mean_summary: no such scheme");
  }
  SchemeSummary m;
  m.scheme = result.schemes[scheme_index];
  double speed_sum = 0.0;
  std::size_t speed_n = 0, rounds = 0;
  for (const auto& trial : result.summaries) {
    const SchemeSummary& s = trial[scheme_index];
    m.final_loss += s.final_loss;
    m.time_to_target_s += s.time_to_target_s;
    m.mean_efficiency += s.mean_efficiency;
    rounds += s.rounds;
    if (std::isfinite(s.speedup)) {
      speed_sum += s.speedup;
      ++speed_n;
    }
  }
  const double n = static_cast<double>(result.summaries.size());
  m.final_loss /= n;
  m.time_to_target_s /= n;
  m.mean_efficiency /= n;
  m.rounds = rounds / result.summaries.size();
  m.speedup = speed_n ? speed_sum / static_cast<double>(speed_n) : kNaN;
  return m;
}

void write_csv(std::ostream& out, const SimResult& result) {
  out << "trial,scheme,round,global_batch,delta_loss,round_latency_s,"
         "cumulative_time_s,loss,efficiency,batches,uplink_slots_s,"
         "downlink_slots_s\n";
  for (const auto& trial : result.runs) {
    for (const SchemeRun& r : trial) {
      for (const RoundRecord& rec : r.rounds) {
        out << r.trial << ',' << to_string(r.scheme) << ',' << rec.round << ','
            << format_number(rec.global_batch) << ','
            << format_number(rec.delta_loss) << ','
            << format_number(rec.latency_s) << ','
            << format_number(rec.cumulative_s) << ',' << format_number(rec.loss)
            << ',' << format_number(rec.efficiency) << ',' << join(rec.batch)
            << ',' << join(rec.uplink_slot_s) << ','
            << join(rec.downlink_slot_s) << '\n';
      }
    }
  }
}

void write_json(std::ostream& out, const SimResult& result,
                const ScenarioConfig& cfg) {
  using nlohmann::ordered_json;
  auto num = [](double x) { return std::isfinite(x) ? ordered_json(x) : ordered_json(); };
  ordered_json doc;
  doc["mode"] = cfg.mode == Mode::Cpu ? "cpu" : "gpu";
  doc["devices"] = cfg.device_count;
  doc["rounds"] = cfg.rounds;
  doc["trials"] = cfg.trials;
  doc["master_seed"] = cfg.master_seed;
  doc["reference"] = to_string(cfg.reference);
  doc["initial_loss"] = cfg.initial_loss;
  doc["target_loss"] = result.target_loss;
  doc["dominance_violations"] = result.dominance_violations;
  ordered_json summary = ordered_json::array();
  for (std::size_t i = 0; i < result.schemes.size(); ++i) {
    const SchemeSummary m = mean_summary(result, i);
    ordered_json row;
    row["scheme"] = to_string(m.scheme);
    row["mean_time_to_target_s"] = num(m.time_to_target_s);
    row["mean_speedup"] = num(m.speedup);
    row["mean_final_loss"] = num(m.final_loss);
    row["mean_efficiency"] = num(m.mean_efficiency);
    summary.push_back(row);
  }
  doc["summary"] = summary;
  ordered_json per_trial = ordered_json::array();
  for (std::size_t t = 0; t < result.summaries.size(); ++t) {
    ordered_json rows = ordered_json::array();
    for (const SchemeSummary& s : result.summaries[t]) {
      ordered_json row;
      row["scheme"] = to_string(s.scheme);
      row["rounds"] = s.rounds;
      row["time_to_target_s"] = num(s.time_to_target_s);
      row["speedup"] = num(s.speedup);
      row["final_loss"] = num(s.final_loss);
      row["mean_efficiency"] = num(s.mean_efficiency);
      rows.push_back(row);
    }
    per_trial.push_back({{"trial", t}, {"schemes", rows}});
  }
  doc["per_trial"] = per_trial;
  out << doc.dump(2) << '\n';
}

}  // namespace feel::sim
