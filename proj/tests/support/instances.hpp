#pragma once

// Random instance generators shared by the unit tests and the acceptance run.

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "feel/channel.hpp"
#include "feel/instance.hpp"

namespace feel::testing {

struct CpuRanges {
  std::size_t k_min = 1, k_max = 12;
  double f_min = 0.5e9, f_max = 2.5e9;
  double radius_km = 0.2;
  double params_min = 1e5, params_max = 1e7;  // log-uniform
  double cycles_min = 1e7, cycles_max = 1e9;  // log-uniform
  double max_batch = 128;
  std::uint64_t mc_samples = 2000;
};

inline double log_uniform(std::mt19937_64& rng, double lo, double hi) {
  std::uniform_real_distribution<double> u(std::log(lo), std::log(hi));
  return std::exp(u(rng));
}

/// Rates of a device dropped area-uniformly in the cell.
inline channel::RateEstimate random_rates(std::mt19937_64& rng, double radius_km,
                                          std::uint64_t mc_samples,
                                          std::uint64_t stream) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const double d = std::max(0.01, radius_km * std::sqrt(u(rng)));
  channel::ChannelParams p;
  p.mc_samples = mc_samples;
  p.rng_seed = rng();
  return channel::estimate_rates(28.0, 28.0, d, p, stream);
}

inline CpuInstance random_cpu_instance(std::mt19937_64& rng, const CpuRanges& r = {}) {
  std::uniform_int_distribution<std::size_t> kd(r.k_min, r.k_max);
  std::uniform_real_distribution<double> fd(r.f_min, r.f_max);
  CpuInstance inst;
  const std::size_t k = kd(rng);
  for (std::size_t i = 0; i < k; ++i) {
    inst.devices.push_back({fd(rng)});
    inst.rates.push_back(random_rates(rng, r.radius_km, r.mc_samples, i));
  }
  inst.cost.param_count = std::round(log_uniform(rng, r.params_min, r.params_max));
  inst.cost.cycles_per_sample = log_uniform(rng, r.cycles_min, r.cycles_max);
  inst.cost.update_cycles = log_uniform(rng, 1e7, 1e9);
  inst.cost.loss_coefficient = log_uniform(rng, 1e-3, 1.0);
  inst.max_batch = r.max_batch;
  return inst;
}

struct GpuRanges {
  std::size_t k = 2;
  double max_batch = 8;
  std::vector<double> thresholds = {2, 3};
  double flat_min = 0.01, flat_max = 0.2;
  double slope_min = 1e-3, slope_max = 5e-2;
  double params_min = 5e4, params_max = 5e5;
};

inline GpuInstance random_gpu_instance(std::mt19937_64& rng, const GpuRanges& r = {}) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  GpuInstance inst;
  for (std::size_t i = 0; i < r.k; ++i) {
    latency::GpuProfile g;
    g.flat_latency_s = r.flat_min + (r.flat_max - r.flat_min) * u(rng);
    g.slope_s_per_sample = log_uniform(rng, r.slope_min, r.slope_max);
    g.threshold_batch = r.thresholds[i % r.thresholds.size()];
    g.gpu_flops = log_uniform(rng, 1e12, 2e13);
    inst.devices.push_back(g);
    inst.rates.push_back(random_rates(rng, 0.2, 2000, i));
  }
  inst.cost.param_count = std::round(log_uniform(rng, r.params_min, r.params_max));
  inst.cost.update_flops = log_uniform(rng, 1e9, 1e11);
  inst.cost.loss_coefficient = log_uniform(rng, 1e-3, 1.0);
  inst.max_batch = r.max_batch;
  return inst;
}

/// Small CPU instance where compute and upload times are comparable, so the
/// optimum is usually interior.
inline CpuInstance small_cpu_instance(std::mt19937_64& rng, std::size_t k = 2,
                                      double max_batch = 8) {
  CpuRanges r;
  r.k_min = r.k_max = k;
  r.params_min = 5e4;
  r.params_max = 5e5;
  r.cycles_min = 2e7;
  r.cycles_max = 5e8;
  r.max_batch = max_batch;
  return random_cpu_instance(rng, r);
}

}  // namespace feel::testing
