#pragma once

#include <span>
#include <string>
#include <vector>

#include "feel/instance.hpp"
#include "feel/plan.hpp"

/// Brute-force reference planner for small instances. It evaluates the
/// round objective from the latency and loss modules only and shares no code
/// with the optimizers it is used to check.
namespace feel::oracle {

struct GridSpec {
  /// Candidate batches per device; empty means every integer in [1, B^max].
  std::vector<std::vector<double>> batch_values;
  /// Each frame is cut into this many equal steps; slots are multiples of one
  /// step except the last device's, which takes the exact remainder.
  std::size_t slot_levels = 64;
  /// When positive, only batch combinations summing to this are searched.
  double global_batch = 0.0;
  unsigned long long max_points = 50'000'000ULL;

  double slot_resolution(double frame_s) const {
    return frame_s / static_cast<double>(slot_levels);
  }
};

struct OracleResult {
  RoundPlan plan;
  double efficiency = 0.0;
  unsigned long long points = 0;
};

/// Efficiency of an explicit allocation, from the latency and loss modules.
double evaluate(const CpuInstance& inst, std::span<const double> batches,
                std::span<const double> uplink_slots,
                std::span<const double> downlink_slots);
double evaluate(const GpuInstance& inst, std::span<const double> batches,
                std::span<const double> uplink_slots,
                std::span<const double> downlink_slots);

/// Grid size used against max_points (ignores the global_batch filter).
unsigned long long grid_points(std::size_t devices, const GridSpec& spec,
                               double max_batch);

/// Exhaustive search over batch combinations and simplex slot grids.
/// Throws CapExceeded when the grid exceeds spec.max_points.
OracleResult grid_search(const CpuInstance& inst, const GridSpec& spec);
OracleResult grid_search(const GpuInstance& inst, const GridSpec& spec);

struct Comparison {
  /// (E_oracle - E_plan) / E_oracle; negative when the plan beats the grid.
  double gap = 0.0;
  /// Relative efficiency lost by snapping the plan's slots onto the grid;
  /// the oracle can trail the plan by at most this much.
  double grid_step_bound = 0.0;
  bool plan_feasible = true;
  bool oracle_feasible = true;
  std::vector<std::string> violations;
};

Comparison compare(const RoundPlan& plan, const OracleResult& oracle,
                   const CpuInstance& inst, const GridSpec& spec);
Comparison compare(const RoundPlan& plan, const OracleResult& oracle,
                   const GpuInstance& inst, const GridSpec& spec);

}  // namespace feel::oracle
