#include "feel/cpu_optimizer.hpp"

#include <cmath>
#include <string>

#include "feel/error.hpp"
#include "round_solver.hpp"

namespace feel {

void validate(const CpuInstance& inst) {
  if (inst.devices.empty()) throw InvalidArgument("instance has no devices");
  if (inst.rates.size() != inst.devices.size()) {
    throw InvalidArgument("instance needs one rate estimate per device");
  }
  if (!(inst.max_batch >= 1.0)) throw InvalidArgument("max_batch must be >= 1");
  if (!(inst.frames.uplink_s > 0.0) || !(inst.frames.downlink_s > 0.0)) {
    throw InvalidArgument("frame lengths must be positive");
  }
  latency::validate(inst.cost);
  for (const auto& d : inst.devices) latency::validate(d);
  for (const auto& r : inst.rates) channel::validate(r);
}

}  // namespace feel

namespace feel::cpu {

namespace {

detail::AffineFleet fleet_of(const CpuInstance& inst) {
  validate(inst);
  detail::AffineFleet f;
  const std::size_t n = inst.size();
  const double bmax = std::floor(inst.max_batch);
  for (std::size_t k = 0; k < n; ++k) {
    f.speed.push_back(inst.devices[k].cpu_freq_hz / inst.cost.cycles_per_sample);
    f.offset.push_back(0.0);
    f.lo.push_back(1.0);
    f.hi.push_back(bmax);
    f.up_rate.push_back(inst.rates[k].uplink_bps);
    f.down_rate.push_back(inst.rates[k].downlink_bps);
    f.update_s.push_back(latency::cpu_update_latency(inst.cost, inst.devices[k]));
  }
  f.bits = inst.cost.gradient_bits();
  f.frames = inst.frames;
  f.xi = inst.cost.loss_coefficient;
  f.compute_latency = [devices = inst.devices, cost = inst.cost](std::size_t k,
                                                                 double b) {
    return latency::cpu_compute_latency(b, cost, devices[k]);
  };
  return f;
}

}  // namespace

EuBounds eu_bounds(const CpuInstance& inst, double global_batch) {
  const detail::EuBracket b = detail::eu_bounds(fleet_of(inst), global_batch);
  return {b.lower, b.upper};
}

MuBounds mu_bounds(const CpuInstance& inst, double eu_star,
                   double global_batch) {
  const detail::MuBracket b =
      detail::mu_bounds(fleet_of(inst), eu_star, global_batch);
  return {b.lower, b.upper, b.degenerate};
}

double pre_clamp_batch(double delta_loss, double eu_star, double mu,
                       double gradient_bits, double frame_s, double priority,
                       double uplink_rate, double speed) {
  return detail::pre_clamp_batch(delta_loss, eu_star, mu, gradient_bits,
                                 frame_s, priority, uplink_rate, speed, 0.0);
}

UplinkAllocation solve_uplink(const CpuInstance& inst, double global_batch,
                              const Tolerance& tol) {
  return detail::solve_uplink(fleet_of(inst), global_batch, tol);
}

DownlinkAllocation solve_downlink(const CpuInstance& inst, double global_batch,
                                  const Tolerance& tol) {
  return detail::solve_downlink(fleet_of(inst), global_batch, tol);
}

RoundPlan optimize_round(const CpuInstance& inst, const SolveOptions& opts) {
  return detail::optimize(fleet_of(inst), opts);
}

RoundPlan plan_at_batch(const CpuInstance& inst, double global_batch,
                        const SolveOptions& opts) {
  return detail::plan_at_batch(fleet_of(inst), global_batch, opts);
}

RoundPlan plan_for_batches(const CpuInstance& inst,
                           std::span<const double> batches, SlotPolicy policy,
                           const Tolerance& tol) {
  return detail::plan_for_batches(fleet_of(inst), batches, policy, tol);
}

KktReport kkt_residuals(const RoundPlan& plan, const CpuInstance& inst) {
  return detail::kkt_residuals(fleet_of(inst), plan);
}

}  // namespace feel::cpu
