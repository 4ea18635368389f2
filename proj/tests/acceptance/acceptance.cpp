// Acceptance run: one PASS/FAIL line per criterion. Exit status is the number
// of failing criteria (capped at 1).

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "../support/instances.hpp"
#include "../support/reference.hpp"
#include "feel/channel.hpp"
#include "feel/cpu_optimizer.hpp"
#include "feel/gpu_optimizer.hpp"
#include "feel/loss.hpp"
#include "feel/oracle.hpp"
#include "feel/simulator.hpp"

using namespace feel;

namespace {

// Tolerances.
constexpr double kOracleGap = 1e-3;
constexpr double kOracleMinutes = 5.0;
constexpr double kKktResidual = 1e-6;
constexpr double kFrameSum = 1e-9;      // relative
constexpr double kEqualized = 1e-6;     // relative
constexpr double kBracketSlack = 1e-9;  // relative, floating-point room at the edges
constexpr double kClosedForm = 1e-9;
constexpr double kStructural = 1e-6;
constexpr double kFitExact = 1e-9;
constexpr double kFitNoisy = 0.05;
constexpr double kDominanceMinutes = 10.0;
constexpr double kDominanceSlack = 1e-9;

struct Outcome {
  bool pass = false;
  std::string detail;
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string fmt(const char* pattern, double a, double b = 0.0, double c = 0.0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, pattern, a, b, c);
  return buf;
}

double rel(double a, double b) {
  return std::abs(a - b) / std::max(std::abs(b), 1e-300);
}

// Oracle comparison shared by the CPU and GPU runs.
struct GapStats {
  double worst_against = -1e300;  // largest gap (oracle ahead)
  double worst_excess = -1e300;   // -gap beyond the grid-step allowance
  int failures = 0;
};

void record(GapStats& s, const oracle::Comparison& c, const RoundPlan& plan,
            const oracle::OracleResult& best) {
  s.worst_against = std::max(s.worst_against, c.gap);
  const double allowance = c.grid_step_bound * plan.efficiency / best.efficiency;
  s.worst_excess = std::max(s.worst_excess, -c.gap - allowance);
  if (c.gap > kOracleGap || -c.gap > allowance + 1e-12 || !c.plan_feasible ||
      !c.oracle_feasible) {
    ++s.failures;
  }
}

Outcome oracle_cpu() {
  const auto t0 = std::chrono::steady_clock::now();
  std::mt19937_64 rng(101);
  oracle::GridSpec spec;
  spec.slot_levels = 64;
  GapStats s;
  for (int i = 0; i < 20; ++i) {
    const CpuInstance inst = testing::small_cpu_instance(rng, 2, 8);
    const RoundPlan plan = cpu::optimize_round(inst);
    const oracle::OracleResult best = oracle::grid_search(inst, spec);
    record(s, oracle::compare(plan, best, inst, spec), plan, best);
  }
  const double t = seconds_since(t0);
  return {s.failures == 0 && t < kOracleMinutes * 60.0,
          fmt("20 instances, worst gap %.2e (limit 1e-3), worst excess beyond one "
              "grid step %.2e, %.1f s",
              s.worst_against, s.worst_excess, t)};
}

Outcome oracle_gpu() {
  const auto t0 = std::chrono::steady_clock::now();
  std::mt19937_64 rng(202);
  oracle::GridSpec spec;
  spec.slot_levels = 64;
  GapStats s;
  int below_threshold = 0;
  for (int i = 0; i < 20; ++i) {
    const GpuInstance inst = testing::random_gpu_instance(rng);
    const RoundPlan plan = gpu::optimize_round_gpu(inst);
    const oracle::OracleResult best = oracle::grid_search(inst, spec);
    record(s, oracle::compare(plan, best, inst, spec), plan, best);
    for (std::size_t k = 0; k < inst.size(); ++k) {
      if (plan.uplink.batch[k] < inst.devices[k].threshold_batch) ++below_threshold;
    }
  }
  const double t = seconds_since(t0);
  return {s.failures == 0 && below_threshold == 0 && t < kOracleMinutes * 60.0,
          fmt("20 instances, worst gap %.2e, worst excess %.2e, batches below "
              "threshold %.0f",
              s.worst_against, s.worst_excess, below_threshold)};
}

struct ScaleRun {
  double max_kkt = 0.0;
  double max_frame = 0.0;
  double max_equal = 0.0;
  int eu_violations = 0;
  int mu_violations = 0;
  int mu_checked = 0;
  double seconds = 0.0;
};

// 1000 instances of up to 12 devices in the reference cell, solved on the
// continuous relaxation (integer batches are not stationary points).
const ScaleRun& scale_run() {
  static const ScaleRun result = [] {
    const auto t0 = std::chrono::steady_clock::now();
    ScaleRun r;
    std::mt19937_64 rng(303);
    SolveOptions opts;
    opts.rounding = BatchRounding::Continuous;
    for (int i = 0; i < 1000; ++i) {
      const CpuInstance inst = testing::random_cpu_instance(rng);
      const RoundPlan plan = cpu::optimize_round(inst, opts);
      const KktReport kkt = cpu::kkt_residuals(plan, inst);
      r.max_kkt = std::max(r.max_kkt, kkt.max_abs_residual);

      double up = 0.0, down = 0.0;
      for (double t : plan.uplink.slot_s) up += t;
      for (double t : plan.downlink.slot_s) down += t;
      r.max_frame = std::max({r.max_frame, rel(up, inst.frames.uplink_s),
                              rel(down, inst.frames.downlink_s)});
      const auto& lat = plan.latency;
      for (std::size_t k = 0; k < inst.size(); ++k) {
        r.max_equal = std::max(
            {r.max_equal, rel(lat.compute_s[k] + lat.upload_s[k], lat.uplink_period_s),
             rel(lat.download_s[k] + lat.update_s[k], lat.downlink_period_s)});
      }

      const double b = plan.uplink.global_batch;
      const cpu::EuBounds eu = cpu::eu_bounds(inst, b);
      const double e = plan.uplink.eu_star;
      if (e < eu.lower * (1.0 - kBracketSlack) || e > eu.upper * (1.0 + kBracketSlack)) {
        ++r.eu_violations;
      }
      bool interior = false;
      for (double x : plan.uplink.batch) {
        interior |= x > 1.0 + 1e-9 && x < std::floor(inst.max_batch) - 1e-9;
      }
      if (interior) {
        ++r.mu_checked;
        const cpu::MuBounds mu = cpu::mu_bounds(inst, e, b);
        const double m = plan.uplink.mu_star;
        if (!(m >= mu.lower * (1.0 - kBracketSlack)) ||
            !(m <= mu.upper * (1.0 + kBracketSlack))) {
          ++r.mu_violations;
        }
      }
    }
    r.seconds = seconds_since(t0);
    return r;
  }();
  return result;
}

Outcome kkt_certification() {
  const ScaleRun& r = scale_run();
  return {r.max_kkt < kKktResidual && r.max_frame <= kFrameSum && r.max_equal <= kEqualized,
          fmt("1000 instances, max residual %.2e, max frame-sum error %.2e, max "
              "subperiod spread %.2e",
              r.max_kkt, r.max_frame, r.max_equal)};
}

Outcome bound_containment() {
  const ScaleRun& r = scale_run();
  return {r.eu_violations == 0 && r.mu_violations == 0,
          fmt("E^U violations %.0f, mu violations %.0f (of %.0f plans with an "
              "interior batch)",
              r.eu_violations, r.mu_violations, r.mu_checked)};
}

Outcome closed_form() {
  std::mt19937_64 rng(404);
  double worst = 0.0;
  for (int i = 0; i < 200; ++i) {
    testing::CpuRanges ranges;
    ranges.k_min = ranges.k_max = 1;
    const CpuInstance inst = testing::random_cpu_instance(rng, ranges);
    std::uniform_int_distribution<int> bd(1, 128);
    const double b = bd(rng);
    const RoundPlan plan = cpu::plan_at_batch(inst, b);
    const testing::ref::SingleDevice want = testing::ref::single_device(inst, b);
    worst = std::max({worst, rel(plan.uplink.eu_star, want.eu),
                      rel(plan.downlink.ed_star, want.ed),
                      rel(plan.efficiency, want.efficiency),
                      rel(plan.uplink.slot_s[0], inst.frames.uplink_s),
                      rel(plan.downlink.slot_s[0], inst.frames.downlink_s)});

    SolveOptions relaxed;
    relaxed.rounding = BatchRounding::Continuous;
    const RoundPlan best = cpu::optimize_round(inst, relaxed);
    const double b_star = testing::ref::single_device_best_batch(inst);
    worst = std::max(worst, rel(best.efficiency,
                                testing::ref::single_device(inst, b_star).efficiency));
  }
  return {worst <= kClosedForm,
          fmt("200 single-device instances, worst relative error %.2e", worst)};
}

Outcome structural_equivalence() {
  std::mt19937_64 rng(505);
  double worst = 0.0;
  for (int i = 0; i < 100; ++i) {
    const CpuInstance c = testing::random_cpu_instance(rng);
    GpuInstance g;
    g.rates = c.rates;
    g.cost = c.cost;
    g.cost.update_flops = c.cost.update_cycles;
    g.frames = c.frames;
    g.max_batch = c.max_batch;
    for (const auto& d : c.devices) {
      latency::GpuProfile p;
      p.flat_latency_s = 0.0;
      p.threshold_batch = 0.0;
      p.slope_s_per_sample = c.cost.cycles_per_sample / d.cpu_freq_hz;
      p.gpu_flops = d.cpu_freq_hz;
      g.devices.push_back(p);
    }
    const RoundPlan a = cpu::optimize_round(c);
    const RoundPlan b = gpu::optimize_round_gpu(g);
    worst = std::max(worst, rel(b.efficiency, a.efficiency));
    for (std::size_t k = 0; k < c.size(); ++k) {
      worst = std::max({worst, rel(b.uplink.batch[k], a.uplink.batch[k]),
                        rel(b.uplink.slot_s[k], a.uplink.slot_s[k]),
                        rel(b.downlink.slot_s[k], a.downlink.slot_s[k])});
    }
  }
  return {worst <= kStructural,
          fmt("100 instances, worst relative difference %.2e", worst)};
}

std::vector<gpu::GpuFitSample> curve(const latency::GpuProfile& p) {
  std::vector<gpu::GpuFitSample> out;
  for (int b = 1; b <= 128; ++b) {
    out.push_back({static_cast<double>(b),
                   p.flat_latency_s + p.slope_s_per_sample *
                                          std::max(0.0, b - p.threshold_batch)});
  }
  return out;
}

Outcome gpu_fit() {
  latency::GpuProfile truth;
  truth.flat_latency_s = 0.05;
  truth.slope_s_per_sample = 0.001;
  truth.threshold_batch = 32;
  const auto clean = curve(truth);
  const latency::GpuProfile exact = gpu::fit_gpu_profile(clean);
  const double exact_err = std::max({rel(exact.flat_latency_s, truth.flat_latency_s),
                                     rel(exact.slope_s_per_sample, truth.slope_s_per_sample),
                                     rel(exact.threshold_batch, truth.threshold_batch)});
  std::mt19937_64 rng(606);
  std::normal_distribution<double> noise(0.0, 0.01);
  double worst = 0.0;
  for (int i = 0; i < 100; ++i) {
    auto noisy = clean;
    for (auto& s : noisy) s.latency_s *= 1.0 + noise(rng);
    const latency::GpuProfile f = gpu::fit_gpu_profile(noisy);
    worst = std::max({worst, rel(f.flat_latency_s, truth.flat_latency_s),
                      rel(f.slope_s_per_sample, truth.slope_s_per_sample),
                      rel(f.threshold_batch, truth.threshold_batch)});
  }
  return {exact_err <= kFitExact && worst <= kFitNoisy,
          fmt("noiseless error %.2e, worst of 100 draws at 1%% noise %.2e", exact_err,
              worst)};
}

Outcome scheme_dominance() {
  const auto t0 = std::chrono::steady_clock::now();
  sim::ScenarioConfig cfg;
  cfg.device_count = 6;
  cfg.cost.cycles_per_sample = 1e9;
  cfg.cost.loss_coefficient = 1e-3;
  cfg.rounds = 5000;
  cfg.stop_at_target = true;
  const auto schemes = sim::all_schemes();
  int bad_seeds = 0;
  double worst_ratio = 0.0;  // t_proposed / min baseline t
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    cfg.master_seed = seed;
    const sim::SimResult r = sim::run_schemes(cfg, schemes);
    const auto& rows = r.summaries[0];
    double best_other = std::numeric_limits<double>::infinity();
    for (std::size_t i = 1; i < rows.size(); ++i) {
      best_other = std::min(best_other, rows[i].time_to_target_s);
    }
    const double ratio = rows[0].time_to_target_s / best_other;
    worst_ratio = std::max(worst_ratio, ratio);
    if (!(ratio <= 1.0 + kDominanceSlack)) ++bad_seeds;
  }
  const double t = seconds_since(t0);
  return {bad_seeds == 0 && t < kDominanceMinutes * 60.0,
          fmt("20 seeds, failing seeds %.0f, worst proposed/best-baseline time "
              "ratio %.4f, %.1f s",
              bad_seeds, worst_ratio, t)};
}

Outcome monotonicity() {
  std::mt19937_64 rng(707);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  auto lu = [&](double lo, double hi) { return testing::log_uniform(rng, lo, hi); };
  int fail = 0;
  const int cases = 10000;
  for (int i = 0; i < cases; ++i) {
    const double dl = lu(1e-3, 10), e = lu(1, 1e5), mu = lu(1e-3, 1e6);
    const double s = lu(1e5, 1e9), t = lu(1e-3, 1e-1), rho = lu(1e-3, 1.0);
    const double r = lu(1e6, 1e9), v = lu(0.1, 1e3);
    const double f = 1.0 + lu(1e-3, 1.0);  // perturbation factor
    const double b = cpu::pre_clamp_batch(dl, e, mu, s, t, rho, r, v);
    // Larger speed scales a positive bracket up and a negative one down.
    const double bv = cpu::pre_clamp_batch(dl, e, mu, s, t, rho, r, v * f);
    if (b > 0 ? !(bv > b) : !(bv <= b)) ++fail;
    if (!(cpu::pre_clamp_batch(dl, e, mu * f, s, t, rho, r, v) < b)) ++fail;
    if (!(cpu::pre_clamp_batch(dl, e, mu, s, t, rho * f, r, v) > b)) ++fail;
    if (!(cpu::pre_clamp_batch(dl, e, mu, s, t, rho, r * f, v) > b)) ++fail;
  }
  int loss_fail = 0;
  loss::LossProxy proxy;
  for (int i = 0; i < cases; ++i) {
    proxy.xi = lu(1e-4, 10);
    const double b = 1.0 + lu(1e-2, 1e4), h = std::min(b - 1.0, lu(1e-3, 10)) + 1e-3;
    const double lo = loss::loss_decay(proxy, std::max(1.0, b - h));
    const double mid = loss::loss_decay(proxy, std::max(1.0, b - h) + h);
    const double hi = loss::loss_decay(proxy, std::max(1.0, b - h) + 2 * h);
    if (!(mid > lo) || !(hi > mid) || !(hi - mid < mid - lo)) ++loss_fail;
  }
  int rate_fail = 0;
  channel::ChannelParams p;
  p.mc_samples = 64;
  for (int i = 0; i < cases; ++i) {
    p.rng_seed = rng();
    const double pw = -10.0 + 50.0 * u(rng), d = lu(0.01, 1.0), g = lu(1e-3, 10.0);
    const double base = channel::average_rate(pw, d, p);
    if (!(channel::average_rate(pw + g, d, p) >= base)) ++rate_fail;
    if (!(channel::average_rate(pw, d * (1.0 + g), p) <= base)) ++rate_fail;
  }
  return {fail + loss_fail + rate_fail == 0,
          fmt("10^4 cases each: batch formula failures %.0f (increasing in speed, "
              "rho and uplink rate, decreasing in mu), loss-decay concavity failures "
              "%.0f, rate monotonicity failures %.0f",
              fail, loss_fail, rate_fail)};
}

}  // namespace

int main() {
  struct Criterion {
    const char* name;
    std::function<Outcome()> check;
  };
  const std::vector<Criterion> criteria = {
      {"oracle equivalence (cpu)", oracle_cpu},
      {"oracle equivalence (gpu)", oracle_gpu},
      {"kkt certification at scale", kkt_certification},
      {"bound containment", bound_containment},
      {"single-device closed form", closed_form},
      {"gpu/cpu structural equivalence", structural_equivalence},
      {"gpu fit round trip", gpu_fit},
      {"scheme dominance", scheme_dominance},
      {"formula monotonicity", monotonicity},
  };
  int failed = 0;
  for (const Criterion& c : criteria) {
    Outcome o;
    try {
      o = c.check();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    std::printf("%s  %-32s %s\n", o.pass ? "PASS" : "FAIL", c.name, o.detail.c_str());
    std::fflush(stdout);
    failed += o.pass ? 0 : 1;
  }
  std::printf("%d of %zu criteria passed\n", static_cast<int>(criteria.size()) - failed,
              criteria.size());
  return failed == 0 ? 0 : 1;
}
