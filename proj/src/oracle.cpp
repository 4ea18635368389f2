#include "feel/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <string>

#include "feel/error.hpp"
#include "feel/latency.hpp"
#include "feel/loss.hpp"

namespace feel::oracle {

namespace {

// Everything the oracle needs from an instance, taken straight from the
// latency module.
struct Problem {
  std::size_t k = 0;
  double max_batch = 0.0;
  double bits = 0.0;
  Frames frames;
  std::vector<double> up_rate, down_rate, update_s, speed;
  std::function<double(std::size_t, double)> compute;
  loss::LossProxy proxy;
};

Problem problem_of(const CpuInstance& inst) {
  validate(inst);
  Problem p;
  p.k = inst.size();
  p.max_batch = inst.max_batch;
  p.bits = inst.cost.gradient_bits();
  p.frames = inst.frames;
  for (std::size_t k = 0; k < p.k; ++k) {
    p.up_rate.push_back(inst.rates[k].uplink_bps);
    p.down_rate.push_back(inst.rates[k].downlink_bps);
    p.update_s.push_back(latency::cpu_update_latency(inst.cost, inst.devices[k]));
    p.speed.push_back(inst.devices[k].cpu_freq_hz / inst.cost.cycles_per_sample);
  }
  p.compute = [devices = inst.devices, cost = inst.cost](std::size_t k, double b) {
    return latency::cpu_compute_latency(b, cost, devices[k]);
  };
  p.proxy.xi = inst.cost.loss_coefficient;
  return p;
}

Problem problem_of(const GpuInstance& inst) {
  if (inst.devices.empty() || inst.rates.size() != inst.devices.size()) {
    throw InvalidArgument("oracle: instance needs devices and one rate each");
  }
  latency::validate(inst.cost);
  Problem p;
  p.k = inst.size();
  p.max_batch = inst.max_batch;
  p.bits = inst.cost.gradient_bits();
  p.frames = inst.frames;
  for (std::size_t k = 0; k < p.k; ++k) {
    channel::validate(inst.rates[k]);
    p.up_rate.push_back(inst.rates[k].uplink_bps);
    p.down_rate.push_back(inst.rates[k].downlink_bps);
    p.update_s.push_back(latency::gpu_update_latency(inst.cost, inst.devices[k]));
    p.speed.push_back(1.0 / inst.devices[k].slope_s_per_sample);
  }
  p.compute = [devices = inst.devices, bmax = inst.max_batch](std::size_t k,
                                                              double b) {
    return latency::gpu_compute_latency(b, devices[k], bmax);
  };
  p.proxy.xi = inst.cost.loss_coefficient;
  return p;
}

std::vector<latency::DeviceLatency> per_device(const Problem& p,
                                               std::span<const double> batches,
                                               std::span<const double> up,
                                               std::span<const double> down) {
  if (batches.size() != p.k || up.size() != p.k || down.size() != p.k) {
    throw InvalidArgument("oracle: allocation size does not match the fleet");
  }
  std::vector<latency::DeviceLatency> d(p.k);
  for (std::size_t k = 0; k < p.k; ++k) {
    d[k].compute_s = p.compute(k, batches[k]);
    d[k].upload_s =
        latency::transmission_latency(p.bits, p.frames.uplink_s, up[k], p.up_rate[k]);
    d[k].download_s = latency::transmission_latency(p.bits, p.frames.downlink_s,
                                                    down[k], p.down_rate[k]);
    d[k].update_s = p.update_s[k];
  }
  return d;
}

double global_batch_of(std::span<const double> batches) {
  double b = 0.0;
  for (double x : batches) b += x;
  return b;
}

double evaluate_problem(const Problem& p, std::span<const double> batches,
                        std::span<const double> up,
                        std::span<const double> down) {
  const auto d = per_device(p, batches, up, down);
  const latency::LatencyBreakdown lat = latency::round_latency(d);
  return loss::learning_efficiency(
      loss::loss_decay(p.proxy, global_batch_of(batches)), lat.round_total_s);
}

RoundPlan plan_of(const Problem& p, std::span<const double> batches,
                  std::span<const double> up, std::span<const double> down) {
  RoundPlan plan;
  const auto d = per_device(p, batches, up, down);
  plan.latency = latency::round_latency(d);
  plan.delta_loss = loss::loss_decay(p.proxy, global_batch_of(batches));
  plan.efficiency =
      loss::learning_efficiency(plan.delta_loss, plan.latency.round_total_s);
  UplinkAllocation& u = plan.uplink;
  u.batch.assign(batches.begin(), batches.end());
  u.slot_s.assign(up.begin(), up.end());
  u.speed = p.speed;
  double total_speed = 0.0;
  for (double v : p.speed) total_speed += v;
  for (double v : p.speed) u.priority.push_back(v / total_speed);
  u.global_batch = global_batch_of(batches);
  u.eu_star = plan.latency.uplink_period_s / plan.delta_loss;
  u.mu_star = std::numeric_limits<double>::quiet_NaN();
  plan.downlink.slot_s.assign(down.begin(), down.end());
  plan.downlink.ed_star = plan.latency.downlink_period_s / plan.delta_loss;
  return plan;
}

unsigned long long binomial(unsigned long long n, unsigned long long r) {
  if (r > n) return 0;
  r = std::min(r, n - r);
  unsigned long long out = 1;
  for (unsigned long long i = 1; i <= r; ++i) {
    const unsigned long long next = out * (n - r + i) / i;
    if (next < out) return std::numeric_limits<unsigned long long>::max();
    out = next;
  }
  return out;
}

unsigned long long saturating_mul(unsigned long long a, unsigned long long b) {
  if (a != 0 && b > std::numeric_limits<unsigned long long>::max() / a) {
    return std::numeric_limits<unsigned long long>::max();
  }
  return a * b;
}

std::vector<std::vector<double>> batch_sets(const Problem& p, const GridSpec& spec) {
  std::vector<std::vector<double>> sets = spec.batch_values;
  if (sets.empty()) {
    std::vector<double> all;
    for (double b = 1.0; b <= std::floor(p.max_batch); b += 1.0) all.push_back(b);
    sets.assign(p.k, all);
  }
  if (sets.size() != p.k) {
    throw InvalidArgument("oracle: batch_values needs one set per device");
  }
  for (const auto& s : sets) {
    if (s.empty()) throw InvalidArgument("oracle: empty batch set");
    for (double b : s) {
      if (!(b >= 1.0) || b > p.max_batch) {
        throw InvalidArgument("oracle: batch value outside [1, B^max]");
      }
    }
  }
  return sets;
}

// Positive compositions of `levels` into `parts`; slot k is n_k * T / levels,
// except the last, which is T minus the others.
class Simplex {
 public:
  Simplex(std::size_t parts, std::size_t levels, double frame)
      : parts_(parts), levels_(levels), frame_(frame),
        step_(frame / static_cast<double>(levels)) {}

  template <class Visit>
  void for_each(Visit&& visit) const {
    std::vector<std::size_t> n(parts_, 0);
    std::vector<double> tau(parts_, 0.0);
    recurse(0, levels_, n, tau, visit);
  }

 private:
  template <class Visit>
  void recurse(std::size_t k, std::size_t left, std::vector<std::size_t>& n,
               std::vector<double>& tau, Visit& visit) const {
    if (k + 1 == parts_) {
      if (left < 1) return;
      double used = 0.0;
      for (std::size_t j = 0; j + 1 < parts_; ++j) used += tau[j];
      n[k] = left;
      tau[k] = frame_ - used;
      visit(n, tau);
      return;
    }
    const std::size_t reserve = parts_ - k - 1;
    for (std::size_t c = 1; c + reserve <= left; ++c) {
      n[k] = c;
      tau[k] = static_cast<double>(c) * step_;
      recurse(k + 1, left - c, n, tau, visit);
    }
  }

  std::size_t parts_;
  std::size_t levels_;
  double frame_;
  double step_;
};

struct BestSlots {
  double period = std::numeric_limits<double>::infinity();
  std::vector<double> tau;
};

// Best split of one frame given fixed per-device lead times.
BestSlots best_split(const Problem& p, std::span<const double> lead,
                     std::span<const double> rate, double frame,
                     std::size_t levels) {
  BestSlots best;
  Simplex(p.k, levels, frame)
      .for_each([&](const std::vector<std::size_t>&, const std::vector<double>& tau) {
        double period = 0.0;
        for (std::size_t k = 0; k < p.k; ++k) {
          if (!(tau[k] > 0.0)) return;
          period = std::max(period, lead[k] + latency::transmission_latency(
                                                  p.bits, frame, tau[k], rate[k]));
          if (period >= best.period) return;
        }
        best.period = period;
        best.tau = tau;
      });
  return best;
}

OracleResult search(const Problem& p, const GridSpec& spec) {
  if (spec.slot_levels < p.k) {
    throw InvalidArgument("oracle: slot_levels must be at least the device count");
  }
  const auto sets = batch_sets(p, spec);
  unsigned long long combos = 1;
  for (const auto& s : sets) combos = saturating_mul(combos, s.size());
  const unsigned long long simplex = binomial(spec.slot_levels - 1, p.k - 1);
  const unsigned long long total =
      saturating_mul(combos, simplex) == std::numeric_limits<unsigned long long>::max()
          ? std::numeric_limits<unsigned long long>::max()
          : saturating_mul(combos, simplex) + simplex;
  if (total > spec.max_points) {
    throw CapExceeded("oracle grid has " + std::to_string(total) +
                          " points, cap is " + std::to_string(spec.max_points),
                      total);
  }

  // The round objective is dL / (uplink period + downlink period) and the
  // downlink period does not depend on the batches.
  const BestSlots down =
      best_split(p, p.update_s, p.down_rate, p.frames.downlink_s, spec.slot_levels);

  OracleResult out;
  out.points = total;
  double best_eff = -1.0;
  std::vector<double> best_batches, best_up;
  std::vector<std::size_t> idx(p.k, 0);
  std::vector<double> batches(p.k), lead(p.k);
  while (true) {
    for (std::size_t k = 0; k < p.k; ++k) {
      batches[k] = sets[k][idx[k]];
      lead[k] = p.compute(k, batches[k]);
    }
    const bool wanted = !(spec.global_batch > 0.0) ||
                        std::abs(global_batch_of(batches) - spec.global_batch) < 1e-9;
    const BestSlots up = !wanted ? BestSlots{} :
        best_split(p, lead, p.up_rate, p.frames.uplink_s, spec.slot_levels);
    const double eff = wanted ? evaluate_problem(p, batches, up.tau, down.tau) : 0.0;
    if (wanted && eff > best_eff) {
      best_eff = eff;
      best_batches = batches;
      best_up = up.tau;
    }
    std::size_t k = p.k;
    while (k > 0) {
      --k;
      if (++idx[k] < sets[k].size()) break;
      idx[k] = 0;
      if (k == 0) {
        if (best_batches.empty()) {
          throw Infeasible("oracle: no batch combination sums to the global batch");
        }
        out.plan = plan_of(p, best_batches, best_up, down.tau);
        out.efficiency = out.plan.efficiency;
        return out;
      }
    }
  }
}

void check_plan(const Problem& p, const RoundPlan& plan, const char* who,
                bool& feasible, std::vector<std::string>& violations) {
  auto flag = [&](const std::string& what) {
    feasible = false;
    violations.push_back(std::string(who) + ": " + what);
  };
  const auto& b = plan.uplink.batch;
  const auto& up = plan.uplink.slot_s;
  const auto& down = plan.downlink.slot_s;
  if (b.size() != p.k || up.size() != p.k || down.size() != p.k) {
    flag("allocation size does not match the fleet");
    return;
  }
  double sum_b = 0.0, sum_up = 0.0, sum_down = 0.0;
  for (std::size_t k = 0; k < p.k; ++k) {
    if (b[k] < 1.0 || b[k] > p.max_batch) {
      flag("batch " + std::to_string(k) + " outside [1, B^max]");
    }
    if (!(up[k] > 0.0)) flag("uplink slot " + std::to_string(k) + " not positive");
    if (!(down[k] > 0.0)) flag("downlink slot " + std::to_string(k) + " not positive");
    sum_b += b[k];
    sum_up += up[k];
    sum_down += down[k];
  }
  if (sum_up > p.frames.uplink_s * (1.0 + 1e-9)) flag("uplink slots exceed the frame");
  if (sum_down > p.frames.downlink_s * (1.0 + 1e-9)) {
    flag("downlink slots exceed the frame");
  }
  if (std::abs(sum_b - plan.uplink.global_batch) > 1e-6 * std::max(1.0, sum_b)) {
    flag("batches do not sum to the global batch");
  }
}

// Nearest grid point to `tau`, every slot at least one step.
std::vector<double> snap(std::span<const double> tau, double frame,
                         std::size_t levels) {
  const std::size_t n = tau.size();
  const double step = frame / static_cast<double>(levels);
  std::vector<long long> c(n);
  long long used = 0;
  for (std::size_t k = 0; k < n; ++k) {
    c[k] = std::max(1LL, std::llround(tau[k] / step));
    used += c[k];
  }
  long long excess = used - static_cast<long long>(levels);
  while (excess != 0) {
    // Move one step from the largest slot, or onto the smallest.
    if (excess > 0) {
      auto it = std::max_element(c.begin(), c.end());
      if (*it <= 1) break;
      --*it;
      --excess;
    } else {
      ++*std::min_element(c.begin(), c.end());
      ++excess;
    }
  }
  std::vector<double> out(n);
  double acc = 0.0;
  for (std::size_t k = 0; k + 1 < n; ++k) {
    out[k] = static_cast<double>(c[k]) * step;
    acc += out[k];
  }
  out[n - 1] = frame - acc;
  return out;
}

Comparison compare_problem(const Problem& p, const RoundPlan& plan,
                           const OracleResult& oracle, const GridSpec& spec) {
  Comparison c;
  check_plan(p, plan, "plan", c.plan_feasible, c.violations);
  check_plan(p, oracle.plan, "oracle", c.oracle_feasible, c.violations);
  c.gap = (oracle.efficiency - plan.efficiency) / oracle.efficiency;
  if (c.plan_feasible && spec.slot_levels >= p.k) {
    const auto up = snap(plan.uplink.slot_s, p.frames.uplink_s, spec.slot_levels);
    const auto down =
        snap(plan.downlink.slot_s, p.frames.downlink_s, spec.slot_levels);
    const double snapped = evaluate_problem(p, plan.uplink.batch, up, down);
    c.grid_step_bound = std::max(0.0, (plan.efficiency - snapped) / plan.efficiency);
  }
  return c;
}

}  // namespace

double evaluate(const CpuInstance& inst, std::span<const double> batches,
                std::span<const double> uplink_slots,
                std::span<const double> downlink_slots) {
  return evaluate_problem(problem_of(inst), batches, uplink_slots, downlink_slots);
}

double evaluate(const GpuInstance& inst, std::span<const double> batches,
                std::span<const double> uplink_slots,
                std::span<const double> downlink_slots) {
  return evaluate_problem(problem_of(inst), batches, uplink_slots, downlink_slots);
}

unsigned long long grid_points(std::size_t devices, const GridSpec& spec,
                               double max_batch) {
  unsigned long long combos = 1;
  if (spec.batch_values.empty()) {
    for (std::size_t k = 0; k < devices; ++k) {
      combos = saturating_mul(combos, static_cast<unsigned long long>(
                                          std::floor(max_batch)));
    }
  } else {
    for (const auto& s : spec.batch_values) combos = saturating_mul(combos, s.size());
  }
  const unsigned long long simplex = binomial(spec.slot_levels - 1, devices - 1);
  const unsigned long long body = saturating_mul(combos, simplex);
  if (body == std::numeric_limits<unsigned long long>::max()) return body;
  return body + simplex;
}

OracleResult grid_search(const CpuInstance& inst, const GridSpec& spec) {
  return search(problem_of(inst), spec);
}

OracleResult grid_search(const GpuInstance& inst, const GridSpec& spec) {
  return search(problem_of(inst), spec);
}

Comparison compare(const RoundPlan& plan, const OracleResult& oracle,
                   const CpuInstance& inst, const GridSpec& spec) {
  return compare_problem(problem_of(inst), plan, oracle, spec);
}

Comparison compare(const RoundPlan& plan, const OracleResult& oracle,
                   const GpuInstance& inst, const GridSpec& spec) {
  return compare_problem(problem_of(inst), plan, oracle, spec);
}

}  // namespace feel::oracle
