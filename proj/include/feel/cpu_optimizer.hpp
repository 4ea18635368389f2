#pragma once

#include <span>

#include "feel/instance.hpp"
#include "feel/plan.hpp"

/// Round planning for CPU fleets.
///
/// For a fixed global batch B the round splits into two independent
/// subperiods. The uplink one (local computation followed by gradient upload)
/// is solved jointly over batches and slots: every device finishes at the same
/// instant dL * E^U, batches follow a clamped closed form in the time-sharing
/// multiplier mu, and a nested bisection (E^U outside, mu inside) enforces
/// sum(tau) = T_f and sum(B_k) = B. The downlink subperiod equalizes
/// download-plus-update latency across devices. The global batch itself is
/// chosen by a one-dimensional search on the resulting efficiency.
namespace feel::cpu {

struct EuBounds {
  double lower = 0.0;  // relaxed-memory value
  double upper = 0.0;  // equal batches, equal slots
};

struct MuBounds {
  double lower = 0.0;
  double upper = 0.0;
  /// B sits at K or K * B^max, every batch is clamped and the closed form
  /// no longer pins mu down.
  bool degenerate = false;
};

EuBounds eu_bounds(const CpuInstance& inst, double global_batch);

MuBounds mu_bounds(const CpuInstance& inst, double eu_star,
                   double global_batch);

/// Closed-form batch of one device before clamping to [1, B^max]:
/// (dL * E^U - sqrt(dL * s * T_f * mu / (rho * R))) * V.
double pre_clamp_batch(double delta_loss, double eu_star, double mu,
                       double gradient_bits, double frame_s, double priority,
                       double uplink_rate, double speed);

/// Joint batch / uplink-slot optimum for a fixed global batch.
/// Throws Infeasible when B lies outside [K, K * B^max] and NumericalFailure
/// when a search bracket does not straddle its root.
UplinkAllocation solve_uplink(const CpuInstance& inst, double global_batch,
                              const Tolerance& tol = {});

DownlinkAllocation solve_downlink(const CpuInstance& inst, double global_batch,
                                  const Tolerance& tol = {});

/// Best plan over the global batch.
RoundPlan optimize_round(const CpuInstance& inst, const SolveOptions& opts = {});

/// Best plan for one given global batch.
RoundPlan plan_at_batch(const CpuInstance& inst, double global_batch,
                        const SolveOptions& opts = {});

/// Plan with batches fixed in advance (baseline schemes).
RoundPlan plan_for_batches(const CpuInstance& inst,
                           std::span<const double> batches,
                           SlotPolicy policy = SlotPolicy::Optimal,
                           const Tolerance& tol = {});

KktReport kkt_residuals(const RoundPlan& plan, const CpuInstance& inst);

}  // namespace feel::cpu
