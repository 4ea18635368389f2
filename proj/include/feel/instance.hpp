#pragma once

#include <cstddef>
#include <vector>

#include "feel/channel.hpp"
#include "feel/latency.hpp"

namespace feel {

/// TDMA frame lengths in seconds.
struct Frames {
  double uplink_s = 0.010;
  double downlink_s = 0.010;
};

/// Everything a single-round planner needs for a CPU fleet.
struct CpuInstance {
  std::vector<latency::CpuProfile> devices;
  std::vector<channel::RateEstimate> rates;
  latency::ModelCost cost;
  Frames frames;
  double max_batch = 128;

  std::size_t size() const { return devices.size(); }
};

/// Everything a single-round planner needs for a GPU fleet.
struct GpuInstance {
  std::vector<latency::GpuProfile> devices;
  std::vector<channel::RateEstimate> rates;
  latency::ModelCost cost;
  Frames frames;
  double max_batch = 128;

  std::size_t size() const { return devices.size(); }
};

void validate(const CpuInstance& inst);
void validate(const GpuInstance& inst);

struct Tolerance {
  double time_s = 1e-9;  // |sum(tau) - T_f|
  double batch = 1e-6;   // |sum(B_k) - B|
};

enum class BatchRounding {
  Integer,     // per-device batches rounded up, then repaired to sum to B
  Continuous,  // relaxed problem, fractional batches
};

struct SolveOptions {
  Tolerance tol;
  BatchRounding rounding = BatchRounding::Integer;
};

/// Slot policy for plans whose batches are fixed in advance.
enum class SlotPolicy {
  Optimal,  // equalize per-device subperiod latencies
  Equal,    // T_f / K each
};

}  // namespace feel
