#pragma once

// Shared machinery of the CPU and GPU planners. Both reduce to devices whose
// local computation takes batch / speed + offset seconds, with batch limited
// to [lo, hi]; CPU devices have zero offset and lo == 1.

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include "feel/instance.hpp"
#include "feel/plan.hpp"

namespace feel::detail {

struct AffineFleet {
  std::vector<double> speed;   // V_k
  std::vector<double> offset;  // seconds
  std::vector<double> lo;      // integer-valued
  std::vector<double> hi;      // integer-valued
  std::vector<double> up_rate;
  std::vector<double> down_rate;
  std::vector<double> update_s;
  double bits = 0.0;
  Frames frames;
  double xi = 1.0;
  /// Exact per-device computation latency used when reporting a plan.
  std::function<double(std::size_t, double)> compute_latency;

  std::size_t size() const { return speed.size(); }
  double batch_floor() const;  // sum lo
  double batch_ceil() const;   // sum hi
  double delta_loss(double global_batch) const;
};

struct EuBracket {
  double lower = 0.0;
  double upper = 0.0;
};

struct MuBracket {
  double lower = 0.0;
  double upper = 0.0;
  bool degenerate = false;
};

EuBracket eu_bounds(const AffineFleet& fleet, double global_batch);
MuBracket mu_bounds(const AffineFleet& fleet, double eu_star,
                    double global_batch);

/// Un-clamped closed-form batch of device k.
double pre_clamp_batch(double delta_loss, double eu_star, double mu,
                       double bits, double frame_s, double priority,
                       double rate, double speed, double offset);

/// Smallest common subperiod latency x with sum_k s T / (R_k (x - a_k)) = T,
/// and the slots achieving it.
struct Equalized {
  double period_s = 0.0;
  std::vector<double> slot_s;
};
Equalized equalize_slots(std::span<const double> fixed_s,
                         std::span<const double> rate, double bits,
                         double frame_s);

UplinkAllocation solve_uplink(const AffineFleet& fleet, double global_batch,
                              const Tolerance& tol);
DownlinkAllocation solve_downlink(const AffineFleet& fleet,
                                  double global_batch, const Tolerance& tol);

/// Batches frozen; slots chosen by policy.
UplinkAllocation uplink_for_batches(const AffineFleet& fleet,
                                    std::span<const double> batches,
                                    SlotPolicy policy);
DownlinkAllocation downlink_for_policy(const AffineFleet& fleet,
                                       double global_batch, SlotPolicy policy,
                                       const Tolerance& tol);

RoundPlan assemble(const AffineFleet& fleet, UplinkAllocation up,
                   DownlinkAllocation down);

RoundPlan plan_at_batch(const AffineFleet& fleet, double global_batch,
                        const SolveOptions& opts);
RoundPlan plan_for_batches(const AffineFleet& fleet,
                           std::span<const double> batches, SlotPolicy policy,
                           const Tolerance& tol);
RoundPlan optimize(const AffineFleet& fleet, const SolveOptions& opts);

KktReport kkt_residuals(const AffineFleet& fleet, const RoundPlan& plan);

}  // namespace feel::detail
