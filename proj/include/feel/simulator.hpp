#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "feel/channel.hpp"
#include "feel/instance.hpp"
#include "feel/latency.hpp"
#include "feel/plan.hpp"

/// Multi-round training under the loss-decay proxy. Every round a scheme
/// picks batches and slots for the current channel, the proxy loss drops by
/// xi * sqrt(B), and the wall clock advances by the round latency.
namespace feel::sim {

enum class Scheme { Proposed, Online, FullBatch, RandomBatch, EqualAllocation };

std::string to_string(Scheme s);
/// Case-insensitive; accepts "proposed", "online", "fullbatch" / "full",
/// "randombatch" / "random", "equalallocation" / "equal".
Scheme parse_scheme(const std::string& name);
std::vector<Scheme> all_schemes();

enum class Mode { Cpu, Gpu };

struct ScenarioConfig {
  std::size_t device_count = 6;
  Mode mode = Mode::Cpu;
  /// Frequencies assigned in contiguous blocks: with K=12 and three entries,
  /// devices 0-3 get the first, 4-7 the second, 8-11 the third.
  std::vector<double> cpu_freq_mix_hz = {0.7e9, 1.4e9, 2.1e9};
  std::vector<latency::GpuProfile> gpu_mix = {latency::GpuProfile{}};
  double cell_radius_km = 0.2;
  /// Devices closer than this are placed at this distance.
  double min_distance_km = 0.01;
  /// When non-empty, replaces the sampled positions (one entry per device).
  std::vector<double> distances_km;
  /// When non-empty, replaces the channel model (one entry per device).
  std::vector<channel::RateEstimate> rate_override;
  double uplink_power_dbm = 28.0;
  double downlink_power_dbm = 28.0;
  channel::ChannelParams channel;
  /// Fading draws averaged into one round's rate. A round spans many frames,
  /// so each round sees a fresh average over its own frames.
  std::uint64_t round_fading_samples = 256;
  /// Keep the round-0 rates (channel.mc_samples draws) for every round.
  bool static_channel = false;

  latency::ModelCost cost;  // cost.loss_coefficient is xi
  Frames frames;
  double max_batch = 128;
  double initial_loss = 2.3;
  double floor_loss = 0.0;
  /// Relative amplitude of uniform noise on each round's loss decay; 0 = off.
  double loss_noise = 0.0;

  std::size_t rounds = 200;
  std::size_t trials = 1;
  std::uint64_t master_seed = 1;
  /// Fraction of initial_loss - floor_loss that defines time-to-target.
  double target_reduction = 0.5;
  bool stop_at_target = false;
  /// Charge every partially used frame in full when timing a round.
  bool integer_frames = false;

  SlotPolicy baseline_slots = SlotPolicy::Optimal;
  Scheme reference = Scheme::FullBatch;
  SolveOptions solve;
  /// Trials run concurrently on up to this many threads; 0 = hardware.
  unsigned threads = 0;
};

void validate(const ScenarioConfig& cfg);

/// Device placement and static channel of one trial.
struct Fleet {
  std::vector<double> distance_km;
  std::vector<latency::CpuProfile> cpu;
  std::vector<latency::GpuProfile> gpu;
  std::vector<channel::RateEstimate> rates;  // round-0 rates
};

/// Positions are area-uniform in the cell (radius r * sqrt(u)).
/// Deterministic in (master_seed, trial).
Fleet generate_scenario(const ScenarioConfig& cfg, std::size_t trial = 0);

/// Rates seen in one round, keyed by (master_seed, trial, round, device).
std::vector<channel::RateEstimate> round_rates(const ScenarioConfig& cfg,
                                               const Fleet& fleet,
                                               std::size_t trial,
                                               std::size_t round);

/// Planner inputs for one round of a trial.
CpuInstance cpu_instance(const ScenarioConfig& cfg, const Fleet& fleet,
                         std::vector<channel::RateEstimate> rates);
GpuInstance gpu_instance(const ScenarioConfig& cfg, const Fleet& fleet,
                         std::vector<channel::RateEstimate> rates);

struct RoundRecord {
  std::size_t round = 0;  // 1-based
  double global_batch = 0.0;
  double delta_loss = 0.0;  // before the floor clamp
  double latency_s = 0.0;
  double cumulative_s = 0.0;
  double loss = 0.0;  // after the round
  double efficiency = 0.0;
  std::vector<double> batch;
  std::vector<double> uplink_slot_s;
  std::vector<double> downlink_slot_s;
};

struct SchemeRun {
  Scheme scheme = Scheme::Proposed;
  std::size_t trial = 0;
  std::vector<RoundRecord> rounds;
};

/// Simulates one scheme on one trial's fleet.
SchemeRun run(const ScenarioConfig& cfg, Scheme scheme, const Fleet& fleet,
              std::size_t trial = 0);

struct SchemeSummary {
  Scheme scheme = Scheme::Proposed;
  double final_loss = 0.0;
  /// Interpolated wall-clock time at which the loss first reaches the target;
  /// +inf when it never does.
  double time_to_target_s = 0.0;
  /// t_reference / t_scheme; NaN when either time is infinite.
  double speedup = 0.0;
  double mean_efficiency = 0.0;
  std::size_t rounds = 0;
};

/// Interpolated time at which the loss trajectory first reaches `target`.
double time_to_loss(const SchemeRun& run, double initial_loss, double target);

/// One summary row per run, speedups against `reference`.
/// Throws InvalidArgument for empty input or a missing reference run.
std::vector<SchemeSummary> summarize(std::span<const SchemeRun> runs,
                                     Scheme reference, double initial_loss,
                                     double target_loss);

struct SimResult {
  std::vector<Scheme> schemes;
  std::vector<std::vector<SchemeRun>> runs;  // [trial][scheme]
  std::vector<std::vector<SchemeSummary>> summaries;  // [trial][scheme]
  /// Rounds in which some baseline's efficiency beat Proposed's by more than
  /// 1e-9 relative, counted over all trials.
  std::size_t dominance_violations = 0;
  double target_loss = 0.0;
};

/// All trials for all schemes; trials run concurrently and are merged by
/// trial index.
SimResult run_schemes(const ScenarioConfig& cfg, std::span<const Scheme> schemes);

/// Mean over trials of one scheme's summaries (speedup averaged over the
/// trials where it is finite).
SchemeSummary mean_summary(const SimResult& result, std::size_t scheme_index);

/// One row per (trial, scheme, round).
void write_csv(std::ostream& out, const SimResult& result);
/// Summary document; non-finite numbers are written as null.
void write_json(std::ostream& out, const SimResult& result,
                const ScenarioConfig& cfg);

}  // namespace feel::sim
