#pragma once

// Test-only reference computations. None of these call into the library's
// solvers; they restate the model from scratch.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "feel/instance.hpp"

namespace feel::testing::ref {

/// W * E[log2(1 + snr |h|^2)] by inverse-transform sampling on a 32-bit
/// Mersenne twister (the library uses the 64-bit engine).
inline double mc_rate(double tx_dbm, double d_km, double bandwidth_hz,
                      double n0_dbm_per_hz, std::uint64_t samples,
                      std::uint32_t seed) {
  const double pl_db = 128.1 + 37.6 * std::log10(d_km);
  const double p_w = std::pow(10.0, (tx_dbm - 30.0) / 10.0);
  const double n_w = std::pow(10.0, (n0_dbm_per_hz - 30.0) / 10.0) * bandwidth_hz;
  const double snr = p_w * std::pow(10.0, -pl_db / 10.0) / n_w;
  std::mt19937 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  long double acc = 0.0;
  for (std::uint64_t i = 0; i < samples; ++i) {
    const double h = -std::log(1.0 - u(rng));
    acc += std::log2(1.0 + snr * h);
  }
  return bandwidth_hz * static_cast<double>(acc / static_cast<long double>(samples));
}

/// One CPU device owning both frames.
struct SingleDevice {
  double eu = 0.0;  // (B C / f + s / R^U) / dL
  double ed = 0.0;  // (s / R^D + M / f) / dL
  double efficiency = 0.0;
};

inline SingleDevice single_device(const CpuInstance& inst, double batch) {
  const double f = inst.devices.at(0).cpu_freq_hz;
  const double s = inst.cost.bits_per_element * inst.cost.param_count;
  const double dl = inst.cost.loss_coefficient * std::sqrt(batch);
  const double up = batch * inst.cost.cycles_per_sample / f + s / inst.rates[0].uplink_bps;
  const double down = s / inst.rates[0].downlink_bps + inst.cost.update_cycles / f;
  return {up / dl, down / dl, dl / (up + down)};
}

/// sqrt(B) / (a B + c) peaks at B = c / a; clamped to [1, B^max].
inline double single_device_best_batch(const CpuInstance& inst) {
  const double f = inst.devices.at(0).cpu_freq_hz;
  const double s = inst.cost.bits_per_element * inst.cost.param_count;
  const double a = inst.cost.cycles_per_sample / f;
  const double c = s / inst.rates[0].uplink_bps + s / inst.rates[0].downlink_bps +
                   inst.cost.update_cycles / f;
  return std::clamp(c / a, 1.0, inst.max_batch);
}

/// Common period x with sum_k s T / (R_k (x - lead_k)) = T, by plain bisection.
inline double equalized_period(std::span<const double> lead, std::span<const double> rate,
                               double bits, double frame) {
  auto used = [&](double x) {
    double t = 0.0;
    for (std::size_t k = 0; k < lead.size(); ++k) {
      t += bits * frame / (rate[k] * (x - lead[k]));
    }
    return t;
  };
  double lo = *std::max_element(lead.begin(), lead.end());
  double hi = lo + 1.0;
  while (used(hi) > frame) hi = lo + 2.0 * (hi - lo);
  for (int i = 0; i < 2000 && hi - lo > 1e-15 * hi; ++i) {
    const double mid = 0.5 * (lo + hi);
    (used(mid) > frame ? lo : hi) = mid;
  }
  return hi;
}

}  // namespace feel::testing::ref
