#pragma once

#include <span>
#include <vector>

namespace feel::latency {

struct CpuProfile {
  double cpu_freq_hz = 1e9;
};

/// Flat ("data bound") latency up to threshold_batch, then linear growth
/// ("compute bound") with slope_s_per_sample.
struct GpuProfile {
  double flat_latency_s = 0.05;
  double slope_s_per_sample = 1e-3;
  double threshold_batch = 32;
  double gpu_flops = 1e13;
};

/// Per-model cost constants. gradient_bits() is b * p.
struct ModelCost {
  double param_count = 8062504;  // DenseNet121
  double bits_per_element = 32;
  double cycles_per_sample = 5e7;
  double update_cycles = 1e8;
  double update_flops = 5e9;
  double loss_coefficient = 1.0;  // xi in  dL = xi * sqrt(B)

  double gradient_bits() const { return bits_per_element * param_count; }
};

void validate(const CpuProfile& dev);
/// max_batch <= 0 skips the threshold upper-bound check.
void validate(const GpuProfile& dev, double max_batch = 0.0);
void validate(const ModelCost& cost);

/// One device's share of a round.
struct DeviceLatency {
  double compute_s = 0.0;
  double upload_s = 0.0;
  double download_s = 0.0;
  double update_s = 0.0;
};

struct LatencyBreakdown {
  std::vector<double> compute_s;
  std::vector<double> upload_s;
  std::vector<double> download_s;
  std::vector<double> update_s;
  double uplink_period_s = 0.0;    // max_k(compute + upload)
  double downlink_period_s = 0.0;  // max_k(download + update)
  double round_total_s = 0.0;
};

double cpu_compute_latency(double batch, const ModelCost& cost,
                           const CpuProfile& dev);

/// s * T_f / (tau * R): fractional frame counts are allowed.
double transmission_latency(double gradient_bits, double frame_s,
                            double slot_s, double rate_bps);

/// Same, but a partially used frame costs a whole frame.
double transmission_latency_whole_frames(double gradient_bits, double frame_s,
                                         double slot_s, double rate_bps);

double cpu_update_latency(const ModelCost& cost, const CpuProfile& dev);

/// Requires 1 <= batch <= max_batch.
double gpu_compute_latency(double batch, const GpuProfile& dev,
                           double max_batch);

double gpu_update_latency(const ModelCost& cost, const GpuProfile& dev);

/// The aggregation step at the server takes no time: the round is the slowest
/// upload subperiod followed by the slowest download subperiod.
LatencyBreakdown round_latency(std::span<const DeviceLatency> per_device);

}  // namespace feel::latency
