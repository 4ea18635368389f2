#include "feel/gpu_optimizer.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <limits>
#include <sstream>
#include <string>

#include "feel/error.hpp"
#include "round_solver.hpp"

namespace feel {

void validate(const GpuInstance& inst) {
  if (inst.devices.empty()) throw InvalidArgument("instance has no devices");
  if (inst.rates.size() != inst.devices.size()) {
    throw InvalidArgument("instance needs one rate estimate per device");
  }
  if (!(inst.max_batch >= 1.0)) throw InvalidArgument("max_batch must be >= 1");
  if (!(inst.frames.uplink_s > 0.0) || !(inst.frames.downlink_s > 0.0)) {
    throw InvalidArgument("frame lengths must be positive");
  }
  latency::validate(inst.cost);
  for (const auto& d : inst.devices) latency::validate(d, inst.max_batch);
  for (const auto& r : inst.rates) channel::validate(r);
}

}  // namespace feel

namespace feel::gpu {

namespace {

// The planner also takes profiles with zero flat latency or zero threshold,
// which collapse the model onto the CPU one.
void validate_for_planning(const GpuInstance& inst) {
  if (inst.devices.empty()) throw InvalidArgument("instance has no devices");
  if (inst.rates.size() != inst.devices.size()) {
    throw InvalidArgument("instance needs one rate estimate per device");
  }
  if (!(inst.max_batch >= 1.0)) throw InvalidArgument("max_batch must be >= 1");
  if (!(inst.frames.uplink_s > 0.0) || !(inst.frames.downlink_s > 0.0)) {
    throw InvalidArgument("frame lengths must be positive");
  }
  latency::validate(inst.cost);
  for (const auto& d : inst.devices) {
    if (!(d.flat_latency_s >= 0.0) || !(d.slope_s_per_sample > 0.0) ||
        !(d.gpu_flops > 0.0) || !(d.threshold_batch >= 0.0) ||
        d.threshold_batch > inst.max_batch) {
      throw InvalidArgument("gpu profile out of range for planning");
    }
  }
  for (const auto& r : inst.rates) channel::validate(r);
}

detail::AffineFleet fleet_of(const GpuInstance& inst) {
  validate_for_planning(inst);
  detail::AffineFleet f;
  const double bmax = std::floor(inst.max_batch);
  for (std::size_t k = 0; k < inst.size(); ++k) {
    const latency::GpuProfile& d = inst.devices[k];
    const double lo = std::ceil(std::max(1.0, d.threshold_batch));
    const double offset = d.flat_latency_s - d.slope_s_per_sample * d.threshold_batch;
    // Computation latency at the smallest admissible batch must not be negative.
    if (offset + d.slope_s_per_sample * lo < 0.0) {
      throw InvalidArgument("gpu profile yields negative latency");
    }
    f.speed.push_back(1.0 / d.slope_s_per_sample);
    f.offset.push_back(offset);
    f.lo.push_back(lo);
    f.hi.push_back(bmax);
    f.up_rate.push_back(inst.rates[k].uplink_bps);
    f.down_rate.push_back(inst.rates[k].downlink_bps);
    f.update_s.push_back(latency::gpu_update_latency(inst.cost, d));
  }
  f.bits = inst.cost.gradient_bits();
  f.frames = inst.frames;
  f.xi = inst.cost.loss_coefficient;
  f.compute_latency = [devices = inst.devices, bmax](std::size_t k, double b) {
    return latency::gpu_compute_latency(b, devices[k], bmax);
  };
  if (f.batch_floor() > f.batch_ceil()) {
    throw Infeasible("sum of GPU batch thresholds exceeds K * B^max");
  }
  return f;
}

struct LineFit {
  double intercept = 0.0;
  double slope = 0.0;
  double rss = std::numeric_limits<double>::infinity();
};

LineFit fit_line(std::span<const double> x, std::span<const double> y) {
  const std::size_t n = x.size();
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= static_cast<double>(n);
  my /= static_cast<double>(n);
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
  }
  LineFit f;
  f.slope = sxx > 0.0 ? sxy / sxx : 0.0;
  f.intercept = my - f.slope * mx;
  f.rss = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double e = y[i] - f.intercept - f.slope * x[i];
    f.rss += e * e;
  }
  return f;
}

bool no_better(double rss_model, double rss_hinge) {
  return rss_model <= rss_hinge * (1.0 + 1e-9) + 1e-300;
}

}  // namespace

double fit_rss(const latency::GpuProfile& profile,
               std::span<const GpuFitSample> samples) {
  double rss = 0.0;
  for (const GpuFitSample& s : samples) {
    const double model =
        profile.flat_latency_s +
        profile.slope_s_per_sample * std::max(0.0, s.batch - profile.threshold_batch);
    rss += (s.latency_s - model) * (s.latency_s - model);
  }
  return rss;
}

latency::GpuProfile fit_gpu_profile(std::span<const GpuFitSample> samples,
                                    double gpu_flops) {
  if (samples.size() < 4) {
    throw UnderdeterminedFit("gpu fit: need at least 4 samples, got " +
                             std::to_string(samples.size()));
  }
  std::vector<double> x, y;
  for (const GpuFitSample& s : samples) {
    if (!(s.batch >= 1.0) || !(s.latency_s > 0.0)) {
      throw InvalidArgument("gpu fit: samples need batch >= 1 and latency > 0");
    }
    x.push_back(s.batch);
    y.push_back(s.latency_s);
  }
  std::vector<double> distinct = x;
  std::sort(distinct.begin(), distinct.end());
  distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
  if (distinct.size() < 3) {
    throw UnderdeterminedFit("gpu fit: need at least 3 distinct batch sizes");
  }

  const double first = std::ceil(distinct[1]);
  const double last = std::floor(distinct[distinct.size() - 2]);
  LineFit best;
  double best_break = 0.0;
  std::vector<double> z(x.size());
  for (double b = first; b <= last; b += 1.0) {
    for (std::size_t i = 0; i < x.size(); ++i) z[i] = std::max(0.0, x[i] - b);
    const LineFit f = fit_line(z, y);
    if (f.rss < best.rss) {
      best = f;
      best_break = b;
    }
  }
  if (!std::isfinite(best.rss)) {
    throw UnderdeterminedFit("gpu fit: no integer breakpoint between the "
                             "second and second-to-last batch");
  }

  const LineFit line = fit_line(x, y);
  const std::vector<double> zeros(x.size(), 0.0);
  const LineFit flat = fit_line(zeros, y);
  if (!(best.slope > 0.0) || no_better(flat.rss, best.rss)) {
    throw UnderdeterminedFit(
        "gpu fit: samples show no compute-bound (rising) region");
  }
  if (no_better(line.rss, best.rss)) {
    throw UnderdeterminedFit(
        "gpu fit: samples show no data-bound (flat) region");
  }
  if (!(best.intercept > 0.0)) {
    throw UnderdeterminedFit("gpu fit: fitted flat latency is not positive");
  }

  latency::GpuProfile p;
  p.flat_latency_s = best.intercept;
  p.slope_s_per_sample = best.slope;
  p.threshold_batch = best_break;
  p.gpu_flops = gpu_flops;
  return p;
}

std::vector<GpuFitSample> read_fit_samples(std::istream& in) {
  std::vector<GpuFitSample> out;
  std::string line;
  std::size_t line_no = 0;
  bool seen_data = false;
  while (std::getline(in, line)) {
    ++line_no;
    std::replace_if(line.begin(), line.end(),
                    [](char c) { return c == ',' || c == ';' || c == '\t' || c == '\r'; },
                    ' ');
    std::istringstream fields(line);
    std::string a, b, extra;
    if (!(fields >> a)) continue;
    fields >> b;
    GpuFitSample s;
    std::size_t used_a = 0, used_b = 0;
    bool numeric = !b.empty() && !(fields >> extra);
    if (numeric) {
      try {
        s.batch = std::stod(a, &used_a);
        s.latency_s = std::stod(b, &used_b);
        numeric = used_a == a.size() && used_b == b.size();
      } catch (const std::exception&) {
        numeric = false;
      }
    }
    if (!numeric) {
      if (!seen_data) {
        seen_data = true;  // header consumed
        continue;
      }
      throw ConfigError("samples line " + std::to_string(line_no) +
                        ": expected two numeric columns (batch, latency_seconds)");
    }
    seen_data = true;
    out.push_back(s);
  }
  return out;
}

RoundPlan optimize_round_gpu(const GpuInstance& inst, const SolveOptions& opts) {
  return detail::optimize(fleet_of(inst), opts);
}

RoundPlan plan_at_batch(const GpuInstance& inst, double global_batch,
                        const SolveOptions& opts) {
  const detail::AffineFleet f = fleet_of(inst);
  if (global_batch < f.batch_floor() - opts.tol.batch) {
    throw Infeasible("global batch " + std::to_string(global_batch) +
                     " is below the sum of GPU batch thresholds " +
                     std::to_string(f.batch_floor()) +
                     " (every batch must stay in the compute-bound region)");
  }
  return detail::plan_at_batch(f, global_batch, opts);
}

RoundPlan plan_for_batches(const GpuInstance& inst,
                           std::span<const double> batches, SlotPolicy policy,
                           const Tolerance& tol) {
  return detail::plan_for_batches(fleet_of(inst), batches, policy, tol);
}

KktReport kkt_residuals(const RoundPlan& plan, const GpuInstance& inst) {
  return detail::kkt_residuals(fleet_of(inst), plan);
}

}  // namespace feel::gpu
