#pragma once

#include <iosfwd>
#include <span>
#include <vector>

#include "feel/instance.hpp"
#include "feel/plan.hpp"

namespace feel::gpu {

/// One measured (batch, gradient computation latency) pair.
struct GpuFitSample {
  double batch = 1.0;
  double latency_s = 0.0;
};

/// Least-squares fit of the flat-then-linear latency curve. The breakpoint is
/// searched over integers between the second and second-to-last distinct
/// sample batch. gpu_flops is not identifiable from latency samples and is
/// copied into the result.
/// Throws UnderdeterminedFit when the samples do not cover both regions.
latency::GpuProfile fit_gpu_profile(std::span<const GpuFitSample> samples,
                                    double gpu_flops = latency::GpuProfile{}.gpu_flops);

/// Residual sum of squares of a profile against samples.
double fit_rss(const latency::GpuProfile& profile,
               std::span<const GpuFitSample> samples);

/// Two-column table (batch, latency_seconds) separated by commas, tabs,
/// semicolons or spaces. A non-numeric first line is taken as a header.
std::vector<GpuFitSample> read_fit_samples(std::istream& in);

/// Best plan over the global batch. Batches are confined to the compute-bound
/// region [max(1, B_k^th), B^max], where latency is affine in the batch; the
/// search is then the CPU one with speed 1 / c_k and a constant offset.
/// Throws Infeasible when sum_k B_k^th exceeds K * B^max.
RoundPlan optimize_round_gpu(const GpuInstance& inst,
                             const SolveOptions& opts = {});

/// Throws Infeasible when B is below sum_k B_k^th.
RoundPlan plan_at_batch(const GpuInstance& inst, double global_batch,
                        const SolveOptions& opts = {});

/// Batches fixed in advance; they may lie in the flat region.
RoundPlan plan_for_batches(const GpuInstance& inst,
                           std::span<const double> batches,
                           SlotPolicy policy = SlotPolicy::Optimal,
                           const Tolerance& tol = {});

KktReport kkt_residuals(const RoundPlan& plan, const GpuInstance& inst);

}  // namespace feel::gpu
