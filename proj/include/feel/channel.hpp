#pragma once

#include <cstdint>
#include <initializer_list>

namespace feel::channel {

/// Large-scale pathloss, Rayleigh small-scale fading and receiver noise for a
/// single-cell TDMA link. Defaults follow the reference cell setup.
struct ChannelParams {
  double bandwidth_hz = 10e6;
  double noise_density_dbm_per_hz = -174.0;
  double pathloss_intercept_db = 128.1;
  double pathloss_slope = 37.6;  // dB per decade of km
  double fading_variance = 1.0;  // mean of |h|^2
  std::uint64_t mc_samples = 100000;
  std::uint64_t rng_seed = 0;
  /// Bypass fading: |h|^2 == 1 on every draw.
  bool deterministic_fading = false;
};

/// Average uplink/downlink data rates of one device, bits per second.
struct RateEstimate {
  double uplink_bps = 0.0;
  double downlink_bps = 0.0;
};

void validate(const ChannelParams& params);
void validate(const RateEstimate& rates);

double dbm_to_watt(double dbm);
double watt_to_dbm(double watt);

/// 128.1 + 37.6 log10(d) with the default coefficients.
double pathloss_db(double distance_km);
double pathloss_db(double distance_km, const ChannelParams& params);

/// Received SNR before fading: P * 10^(-PL/10) / (N0 * W).
double mean_snr(double tx_power_dbm, double distance_km,
                const ChannelParams& params);

/// W * E[log2(1 + snr * |h|^2)], estimated over params.mc_samples draws of
/// the substream (params.rng_seed, stream). Bit-identical for equal inputs.
double average_rate(double tx_power_dbm, double distance_km,
                    const ChannelParams& params, std::uint64_t stream = 0);

/// Uplink on substream 2*device, downlink on 2*device + 1.
RateEstimate estimate_rates(double uplink_power_dbm, double downlink_power_dbm,
                            double distance_km, const ChannelParams& params,
                            std::uint64_t device_id);

/// Mixes a key path (seed, trial, round, ...) into one 64-bit seed through
/// std::seed_seq, whose output is fixed by the standard.
std::uint64_t derive_seed(std::initializer_list<std::uint64_t> keys);

}  // namespace feel::channel
