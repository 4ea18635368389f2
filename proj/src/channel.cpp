#include "feel/channel.hpp"

#include <cmath>
#include <random>
#include <string>
#include <vector>

#include "feel/error.hpp"

namespace feel::channel {

void validate(const ChannelParams& params) {
  if (!(params.bandwidth_hz > 0.0) || !std::isfinite(params.bandwidth_hz)) {
    throw InvalidArgument("channel: bandwidth_hz must be positive and finite");
  }
  if (params.mc_samples < 1) {
    throw InvalidArgument("channel: mc_samples must be at least 1");
  }
  if (!std::isfinite(params.pathloss_intercept_db) ||
      !std::isfinite(params.pathloss_slope)) {
    throw InvalidArgument("channel: pathloss coefficients must be finite");
  }
  if (!std::isfinite(params.noise_density_dbm_per_hz)) {
    throw InvalidArgument("channel: noise density must be finite");
  }
  if (!(params.fading_variance > 0.0) ||
      !std::isfinite(params.fading_variance)) {
    throw InvalidArgument("channel: fading_variance must be positive");
  }
}

void validate(const RateEstimate& rates) {
  auto ok = [](double r) { return r > 0.0 && std::isfinite(r); };
  if (!ok(rates.uplink_bps) || !ok(rates.downlink_bps)) {
    throw InvalidArgument("rates must be strictly positive and finite");
  }
}

double dbm_to_watt(double dbm) { return std::pow(10.0, (dbm - 30.0) / 10.0); }

double watt_to_dbm(double watt) { return 10.0 * std::log10(watt) + 30.0; }

double pathloss_db(double distance_km) {
  return pathloss_db(distance_km, ChannelParams{});
}

double pathloss_db(double distance_km, const ChannelParams& params) {
  if (!(distance_km > 0.0) || !std::isfinite(distance_km)) {
    throw InvalidArgument("pathloss_db: distance must be positive, got " +
                          std::to_string(distance_km));
  }
  return params.pathloss_intercept_db +
         params.pathloss_slope * std::log10(distance_km);
}

double mean_snr(double tx_power_dbm, double distance_km,
                const ChannelParams& params) {
  validate(params);
  const double gain = std::pow(10.0, -pathloss_db(distance_km, params) / 10.0);
  const double noise_w =
      dbm_to_watt(params.noise_density_dbm_per_hz) * params.bandwidth_hz;
  return dbm_to_watt(tx_power_dbm) * gain / noise_w;
}

double average_rate(double tx_power_dbm, double distance_km,
                    const ChannelParams& params, std::uint64_t stream) {
  const double snr = mean_snr(tx_power_dbm, distance_km, params);
  if (!std::isfinite(snr) || snr < 0.0) {
    throw InvalidArgument("average_rate: non-finite SNR");
  }
  if (params.deterministic_fading) {
    return params.bandwidth_hz * std::log2(1.0 + snr);
  }

  std::mt19937_64 rng(derive_seed({params.rng_seed, stream}));
  std::exponential_distribution<double> fading(1.0 / params.fading_variance);
  double sum = 0.0;
  for (std::uint64_t i = 0; i < params.mc_samples; ++i) {
    sum += std::log2(1.0 + snr * fading(rng));
  }
  return params.bandwidth_hz * sum / static_cast<double>(params.mc_samples);
}

RateEstimate estimate_rates(double uplink_power_dbm, double downlink_power_dbm,
                            double distance_km, const ChannelParams& params,
                            std::uint64_t device_id) {
  RateEstimate r;
  r.uplink_bps =
      average_rate(uplink_power_dbm, distance_km, params, 2 * device_id);
  r.downlink_bps =
      average_rate(downlink_power_dbm, distance_km, params, 2 * device_id + 1);
  return r;
}

std::uint64_t derive_seed(std::initializer_list<std::uint64_t> keys) {
  std::vector<std::uint32_t> words;
  words.reserve(2 * keys.size());
  for (std::uint64_t k : keys) {
    words.push_back(static_cast<std::uint32_t>(k));
    words.push_back(static_cast<std::uint32_t>(k >> 32));
  }
  std::seed_seq seq(words.begin(), words.end());
  std::uint32_t out[2];
  seq.generate(out, out + 2);
  return (static_cast<std::uint64_t>(out[1]) << 32) | out[0];
}

}  // namespace feel::channel
