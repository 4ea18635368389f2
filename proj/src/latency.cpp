#include "feel/latency.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "feel/error.hpp"

namespace feel::latency {

namespace {

bool positive(double v) { return v > 0.0 && std::isfinite(v); }

}  // namespace

void validate(const CpuProfile& dev) {
  if (!positive(dev.cpu_freq_hz)) {
    throw InvalidArgument("cpu_freq_hz must be positive");
  }
}

void validate(const GpuProfile& dev, double max_batch) {
  if (!positive(dev.flat_latency_s)) {
    throw InvalidArgument("gpu flat_latency_s must be positive");
  }
  if (!positive(dev.slope_s_per_sample)) {
    throw InvalidArgument("gpu slope_s_per_sample must be positive");
  }
  if (!positive(dev.gpu_flops)) {
    throw InvalidArgument("gpu_flops must be positive");
  }
  if (!(dev.threshold_batch >= 1.0) ||
      (max_batch > 0.0 && dev.threshold_batch > max_batch)) {
    throw InvalidArgument("gpu threshold_batch must lie in [1, max_batch], got " +
                          std::to_string(dev.threshold_batch));
  }
}

void validate(const ModelCost& cost) {
  if (!positive(cost.param_count) || !positive(cost.bits_per_element) ||
      !positive(cost.cycles_per_sample) || !positive(cost.update_cycles) ||
      !positive(cost.update_flops) || !positive(cost.loss_coefficient)) {
    throw InvalidArgument("model cost constants must be strictly positive");
  }
}

double cpu_compute_latency(double batch, const ModelCost& cost,
                           const CpuProfile& dev) {
  if (batch < 0.0) throw InvalidArgument("batch must be non-negative");
  return batch * cost.cycles_per_sample / dev.cpu_freq_hz;
}

double transmission_latency(double gradient_bits, double frame_s,
                            double slot_s, double rate_bps) {
  if (!(slot_s > 0.0)) {
    throw Infeasible("zero time slot: transmission never completes");
  }
  if (slot_s > frame_s * (1.0 + 1e-12)) {
    throw InvalidArgument("slot longer than frame");
  }
  if (!(rate_bps > 0.0)) throw InvalidArgument("rate must be positive");
  return gradient_bits * frame_s / (slot_s * rate_bps);
}

double transmission_latency_whole_frames(double gradient_bits, double frame_s,
                                         double slot_s, double rate_bps) {
  const double frames =
      transmission_latency(gradient_bits, frame_s, slot_s, rate_bps) / frame_s;
  // Guard against 3.0000000000000004 frames turning into 4.
  return std::ceil(frames * (1.0 - 1e-12)) * frame_s;
}

double cpu_update_latency(const ModelCost& cost, const CpuProfile& dev) {
  return cost.update_cycles / dev.cpu_freq_hz;
}

double gpu_compute_latency(double batch, const GpuProfile& dev,
                           double max_batch) {
  if (!(batch >= 1.0) || batch > max_batch) {
    throw InvalidArgument("gpu batch " + std::to_string(batch) +
                          " outside [1, " + std::to_string(max_batch) + "]");
  }
  if (batch <= dev.threshold_batch) return dev.flat_latency_s;
  return dev.slope_s_per_sample * (batch - dev.threshold_batch) +
         dev.flat_latency_s;
}

double gpu_update_latency(const ModelCost& cost, const GpuProfile& dev) {
  return cost.update_flops / dev.gpu_flops;
}

LatencyBreakdown round_latency(std::span<const DeviceLatency> per_device) {
  if (per_device.empty()) {
    throw InvalidArgument("round_latency: empty device list");
  }
  LatencyBreakdown out;
  for (const DeviceLatency& d : per_device) {
    if (d.compute_s < 0.0 || d.upload_s < 0.0 || d.download_s < 0.0 ||
        d.update_s < 0.0) {
      throw InvalidArgument("round_latency: negative latency component");
    }
    out.compute_s.push_back(d.compute_s);
    out.upload_s.push_back(d.upload_s);
    out.download_s.push_back(d.download_s);
    out.update_s.push_back(d.update_s);
    out.uplink_period_s = std::max(out.uplink_period_s, d.compute_s + d.upload_s);
    out.downlink_period_s =
        std::max(out.downlink_period_s, d.download_s + d.update_s);
  }
  out.round_total_s = out.uplink_period_s + out.downlink_period_s;
  return out;
}

}  // namespace feel::latency
