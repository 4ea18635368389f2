#include "round_solver.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>
#include <string>

#include "feel/error.hpp"
#include "feel/latency.hpp"
#include "feel/loss.hpp"

namespace feel::detail {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
// Bisection stops once the bracket is this wide relative to its endpoint.
constexpr double kCollapse = 4.0 * std::numeric_limits<double>::epsilon();
constexpr int kMaxBisect = 400;

double pos(double v) { return v > 0.0 ? v : 0.0; }

double sum(std::span<const double> v) {
  return std::accumulate(v.begin(), v.end(), 0.0);
}

bool collapsed(double a, double b) {
  const double m = 0.5 * (a + b);
  return m <= a || m >= b || (b - a) <= kCollapse * std::max(std::abs(a), std::abs(b));
}

std::vector<double> priorities(const AffineFleet& fleet) {
  const double total = sum(fleet.speed);
  std::vector<double> rho(fleet.size());
  for (std::size_t k = 0; k < fleet.size(); ++k) rho[k] = fleet.speed[k] / total;
  return rho;
}

// w_k with  x - o_k - B_k / V_k = sqrt(mu) * w_k  for unclamped devices.
std::vector<double> slot_weights(const AffineFleet& fleet, double delta_loss,
                                 std::span<const double> rho) {
  std::vector<double> w(fleet.size());
  for (std::size_t k = 0; k < fleet.size(); ++k) {
    w[k] = std::sqrt(delta_loss * fleet.bits * fleet.frames.uplink_s /
                     (rho[k] * fleet.up_rate[k]));
  }
  return w;
}

struct InnerSolution {
  bool finite = false;  // false: the common latency x is too small
  double slot_sum = kInf;
  double q = 0.0;       // sqrt(mu)
  std::vector<double> batch;
  std::vector<double> slot;
};

class UplinkSearch {
 public:
  UplinkSearch(const AffineFleet& fleet, double global_batch)
      : fleet_(fleet),
        target_(global_batch),
        delta_loss_(fleet.delta_loss(global_batch)),
        rho_(priorities(fleet)),
        w_(slot_weights(fleet, delta_loss_, rho_)) {}

  double delta_loss() const { return delta_loss_; }

  double batch_sum(double x, double q) const {
    double total = 0.0;
    for (std::size_t k = 0; k < fleet_.size(); ++k) total += clamped(k, x, q);
    return total;
  }

  MuBracket bracket(double x) const {
    MuBracket b;
    double upper = 0.0;
    double lower = kInf;
    for (std::size_t k = 0; k < fleet_.size(); ++k) {
      const double head = x - fleet_.offset[k];
      upper = std::max(upper, pos(head - fleet_.lo[k] / fleet_.speed[k]) / w_[k]);
      lower = std::min(lower, pos(head - fleet_.hi[k] / fleet_.speed[k]) / w_[k]);
    }
    b.lower = lower * lower;
    b.upper = upper * upper;
    return b;
  }

  // For a common subperiod latency x, the batch split that needs the least
  // total slot time (inner search on mu), and that total.
  InnerSolution solve_at(double x) const {
    InnerSolution out;
    const MuBracket mb = bracket(x);
    double a = std::sqrt(mb.lower);
    double b = std::sqrt(mb.upper);
    double sa = batch_sum(x, a);
    if (sa < target_) return out;
    double sb = batch_sum(x, b);
    for (int it = 0; it < kMaxBisect && !collapsed(a, b); ++it) {
      const double m = 0.5 * (a + b);
      const double sm = batch_sum(x, m);
      if (sm >= target_) {
        a = m;
        sa = sm;
      } else {
        b = m;
        sb = sm;
      }
    }
    // batch_sum is piecewise linear in q; finish on the last segment.
    double q = b;
    if (sa > sb) q = std::clamp(a + (sa - target_) / (sa - sb) * (b - a), a, b);
    out.q = q;
    out.batch.resize(fleet_.size());
    out.slot.resize(fleet_.size());
    double slot_sum = 0.0;
    for (std::size_t k = 0; k < fleet_.size(); ++k) {
      out.batch[k] = clamped(k, x, q);
      const double room =
          x - fleet_.offset[k] - out.batch[k] / fleet_.speed[k];
      if (!(room > 0.0)) return InnerSolution{};
      out.slot[k] = fleet_.bits * fleet_.frames.uplink_s / (fleet_.up_rate[k] * room);
      slot_sum += out.slot[k];
    }
    out.finite = true;
    out.slot_sum = slot_sum;
    return out;
  }

 private:
  double clamped(std::size_t k, double x, double q) const {
    const double raw =
        fleet_.speed[k] * (x - fleet_.offset[k] - q * w_[k]);
    return std::clamp(raw, fleet_.lo[k], fleet_.hi[k]);
  }

  const AffineFleet& fleet_;
  double target_;
  double delta_loss_;
  std::vector<double> rho_;
  std::vector<double> w_;
};

std::string describe(const char* what, double e_lo, double e_hi, double s_lo,
                     double s_hi, double frame) {
  std::ostringstream os;
  os.precision(17);
  os << what << ": E_lo=" << e_lo << " sum_tau(E_lo)=" << s_lo
     << " E_hi=" << e_hi << " sum_tau(E_hi)=" << s_hi << " T_f=" << frame;
  return os.str();
}

bool near_integer(double v) { return std::abs(v - std::round(v)) <= 1e-9 * std::max(1.0, std::abs(v)); }

}  // namespace

double AffineFleet::batch_floor() const { return sum(lo); }

double AffineFleet::batch_ceil() const { return sum(hi); }

double AffineFleet::delta_loss(double global_batch) const {
  loss::LossProxy proxy;
  proxy.xi = xi;
  return loss::loss_decay(proxy, global_batch);
}

EuBracket eu_bounds(const AffineFleet& fleet, double global_batch) {
  const std::size_t n = fleet.size();
  const double delta = fleet.delta_loss(global_batch);
  const double total_speed = sum(fleet.speed);
  const std::vector<double> rho = priorities(fleet);

  double weighted_offset = 0.0;
  double root_sum = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    weighted_offset += fleet.speed[k] * fleet.offset[k];
    root_sum += std::sqrt(rho[k] / fleet.up_rate[k]);
  }
  EuBracket b;
  b.lower = ((global_batch + weighted_offset) / total_speed +
             fleet.bits * root_sum * root_sum) /
            delta;

  // Equal slots with a feasible batch split proportional to each device's
  // batch range; for CPU fleets this is the plain B / K split.
  const double room = fleet.batch_ceil() - fleet.batch_floor();
  const double spare = global_batch - fleet.batch_floor();
  double worst = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    const double share =
        room > 0.0 ? spare * (fleet.hi[k] - fleet.lo[k]) / room : 0.0;
    const double batch = fleet.lo[k] + share;
    worst = std::max(worst, batch / fleet.speed[k] + fleet.offset[k] +
                                static_cast<double>(n) * fleet.bits / fleet.up_rate[k]);
  }
  b.upper = worst / delta;
  return b;
}

MuBracket mu_bounds(const AffineFleet& fleet, double eu_star,
                    double global_batch) {
  if (!(eu_star > 0.0)) throw InvalidArgument("mu_bounds: eu_star must be > 0");
  UplinkSearch search(fleet, global_batch);
  MuBracket b = search.bracket(search.delta_loss() * eu_star);
  const double eps = 1e-9 * std::max(1.0, global_batch);
  b.degenerate = global_batch <= fleet.batch_floor() + eps ||
                 global_batch >= fleet.batch_ceil() - eps;
  return b;
}

double pre_clamp_batch(double delta_loss, double eu_star, double mu,
                       double bits, double frame_s, double priority,
                       double rate, double speed, double offset) {
  return (delta_loss * eu_star - offset -
          std::sqrt(delta_loss * bits * frame_s * mu / (priority * rate))) *
         speed;
}

Equalized equalize_slots(std::span<const double> fixed_s,
                         std::span<const double> rate, double bits,
                         double frame_s) {
  const std::size_t n = fixed_s.size();
  if (n == 0) throw InvalidArgument("equalize_slots: empty fleet");
  double a = -kInf;
  double b = -kInf;
  for (std::size_t k = 0; k < n; ++k) {
    a = std::max(a, fixed_s[k]);
    b = std::max(b, fixed_s[k] + static_cast<double>(n) * bits / rate[k]);
  }
  // Normalized slot demand sum_k s / (R_k (x - a_k)) - 1 falls with x.
  auto excess = [&](double x) {
    double total = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
      const double room = x - fixed_s[k];
      if (!(room > 0.0)) return kInf;
      total += bits / (rate[k] * room);
    }
    return total - 1.0;
  };
  if (excess(b) > 1e-12) {
    throw NumericalFailure("equalize_slots: equal-slot period does not satisfy "
                           "time sharing");
  }
  for (int it = 0; it < kMaxBisect && !collapsed(a, b); ++it) {
    const double m = 0.5 * (a + b);
    if (excess(m) > 0.0) {
      a = m;
    } else {
      b = m;
    }
  }
  Equalized out;
  out.period_s = b;
  out.slot_s.resize(n);
  for (std::size_t k = 0; k < n; ++k) {
    out.slot_s[k] = bits * frame_s / (rate[k] * (b - fixed_s[k]));
  }
  return out;
}

UplinkAllocation uplink_for_batches(const AffineFleet& fleet,
                                    std::span<const double> batches,
                                    SlotPolicy policy) {
  const std::size_t n = fleet.size();
  if (batches.size() != n) {
    throw InvalidArgument("uplink_for_batches: one batch per device required");
  }
  UplinkAllocation up;
  up.batch.assign(batches.begin(), batches.end());
  up.global_batch = sum(batches);
  up.speed = fleet.speed;
  up.priority = priorities(fleet);
  up.mu_star = kNaN;

  std::vector<double> compute(n);
  for (std::size_t k = 0; k < n; ++k) {
    if (!(batches[k] >= 1.0) || batches[k] > fleet.hi[k] * (1.0 + 1e-12)) {
      throw InvalidArgument("batch of device " + std::to_string(k) +
                            " outside [1, max_batch]");
    }
    compute[k] = fleet.compute_latency(k, batches[k]);
  }
  const double delta = fleet.delta_loss(up.global_batch);
  if (policy == SlotPolicy::Optimal) {
    Equalized eq = equalize_slots(compute, fleet.up_rate, fleet.bits,
                                  fleet.frames.uplink_s);
    up.slot_s = std::move(eq.slot_s);
    up.eu_star = eq.period_s / delta;
  } else {
    up.slot_s.assign(n, fleet.frames.uplink_s / static_cast<double>(n));
    double worst = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
      worst = std::max(worst, compute[k] + latency::transmission_latency(
                                               fleet.bits, fleet.frames.uplink_s,
                                               up.slot_s[k], fleet.up_rate[k]));
    }
    up.eu_star = worst / delta;
  }
  return up;
}

UplinkAllocation solve_uplink(const AffineFleet& fleet, double global_batch,
                              const Tolerance& tol) {
  const double floor = fleet.batch_floor();
  const double ceil = fleet.batch_ceil();
  if (!(tol.time_s > 0.0) || !(tol.batch > 0.0)) {
    throw InvalidArgument("solve_uplink: tolerances must be positive");
  }
  if (global_batch < floor - tol.batch || global_batch > ceil + tol.batch) {
    std::ostringstream os;
    os << "global batch " << global_batch << " outside feasible range ["
       << floor << ", " << ceil << "]";
    throw Infeasible(os.str());
  }

  // Every device on one bound: batches are fixed, only slots remain.
  const bool at_floor = global_batch <= floor + tol.batch;
  const bool at_ceil = global_batch >= ceil - tol.batch;
  if (at_floor || at_ceil) {
    UplinkAllocation up =
        uplink_for_batches(fleet, at_floor ? fleet.lo : fleet.hi, SlotPolicy::Optimal);
    const MuBracket mb = mu_bounds(fleet, up.eu_star, up.global_batch);
    up.mu_star = at_floor ? mb.upper : mb.lower;
    up.degenerate = true;
    return up;
  }

  UplinkSearch search(fleet, global_batch);
  const double delta = search.delta_loss();
  const EuBracket eb = eu_bounds(fleet, global_batch);
  const double frame = fleet.frames.uplink_s;

  double e_lo = eb.lower;
  double e_hi = eb.upper;
  if (e_lo > e_hi) {
    if (e_lo > e_hi * (1.0 + 1e-9)) {
      throw NumericalFailure(describe("solve_uplink: inverted E bracket", e_lo,
                                      e_hi, kNaN, kNaN, frame));
    }
    e_lo = e_hi;
  }

  InnerSolution hi_sol = search.solve_at(delta * e_hi);
  const InnerSolution lo_sol = search.solve_at(delta * e_lo);
  // sum(tau) must fall with E: above T_f at the lower bound, below at the
  // upper bound.
  if (!hi_sol.finite || hi_sol.slot_sum > frame + tol.time_s) {
    throw NumericalFailure(describe("solve_uplink: upper E bound infeasible",
                                    e_lo, e_hi, lo_sol.slot_sum,
                                    hi_sol.slot_sum, frame));
  }
  if (lo_sol.finite && lo_sol.slot_sum < frame - tol.time_s) {
    throw NumericalFailure(describe("solve_uplink: lower E bound already "
                                    "feasible",
                                    e_lo, e_hi, lo_sol.slot_sum,
                                    hi_sol.slot_sum, frame));
  }

  for (int it = 0; it < kMaxBisect && !collapsed(e_lo, e_hi); ++it) {
    const double e_mid = 0.5 * (e_lo + e_hi);
    InnerSolution mid = search.solve_at(delta * e_mid);
    if (mid.finite && mid.slot_sum <= frame) {
      e_hi = e_mid;
      hi_sol = std::move(mid);
    } else {
      e_lo = e_mid;
    }
  }

  const double batch_gap = std::abs(sum(hi_sol.batch) - global_batch);
  const double time_gap = std::abs(hi_sol.slot_sum - frame);
  if (batch_gap > tol.batch || time_gap > tol.time_s) {
    std::ostringstream os;
    os.precision(17);
    os << "solve_uplink: search ended with |sum B - B|=" << batch_gap
       << " |sum tau - T|=" << time_gap << " at E=" << e_hi;
    throw NumericalFailure(os.str());
  }

  UplinkAllocation up;
  up.batch = std::move(hi_sol.batch);
  up.slot_s = std::move(hi_sol.slot);
  up.speed = fleet.speed;
  up.priority = priorities(fleet);
  up.global_batch = global_batch;
  up.eu_star = e_hi;
  up.mu_star = hi_sol.q * hi_sol.q;
  return up;
}

DownlinkAllocation downlink_for_policy(const AffineFleet& fleet,
                                       double global_batch, SlotPolicy policy,
                                       const Tolerance& tol) {
  const std::size_t n = fleet.size();
  const double delta = fleet.delta_loss(global_batch);
  DownlinkAllocation down;
  if (policy == SlotPolicy::Optimal) {
    Equalized eq = equalize_slots(fleet.update_s, fleet.down_rate, fleet.bits,
                                  fleet.frames.downlink_s);
    const double gap = std::abs(sum(eq.slot_s) - fleet.frames.downlink_s);
    if (gap > tol.time_s) {
      throw NumericalFailure("solve_downlink: time sharing off by " +
                             std::to_string(gap) + " s");
    }
    down.slot_s = std::move(eq.slot_s);
    down.ed_star = eq.period_s / delta;
  } else {
    down.slot_s.assign(n, fleet.frames.downlink_s / static_cast<double>(n));
    double worst = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
      worst = std::max(worst, fleet.update_s[k] +
                                  latency::transmission_latency(
                                      fleet.bits, fleet.frames.downlink_s,
                                      down.slot_s[k], fleet.down_rate[k]));
    }
    down.ed_star = worst / delta;
  }
  return down;
}

DownlinkAllocation solve_downlink(const AffineFleet& fleet,
                                  double global_batch, const Tolerance& tol) {
  return downlink_for_policy(fleet, global_batch, SlotPolicy::Optimal, tol);
}

RoundPlan assemble(const AffineFleet& fleet, UplinkAllocation up,
                   DownlinkAllocation down) {
  const std::size_t n = fleet.size();
  std::vector<latency::DeviceLatency> parts(n);
  for (std::size_t k = 0; k < n; ++k) {
    parts[k].compute_s = fleet.compute_latency(k, up.batch[k]);
    parts[k].upload_s = latency::transmission_latency(
        fleet.bits, fleet.frames.uplink_s, up.slot_s[k], fleet.up_rate[k]);
    parts[k].download_s = latency::transmission_latency(
        fleet.bits, fleet.frames.downlink_s, down.slot_s[k], fleet.down_rate[k]);
    parts[k].update_s = fleet.update_s[k];
  }
  RoundPlan plan;
  plan.latency = latency::round_latency(parts);
  plan.delta_loss = fleet.delta_loss(up.global_batch);
  plan.efficiency =
      loss::learning_efficiency(plan.delta_loss, plan.latency.round_total_s);
  plan.uplink = std::move(up);
  plan.downlink = std::move(down);
  return plan;
}

namespace {

double uplink_period(const AffineFleet& fleet, std::span<const double> batches) {
  std::vector<double> compute(fleet.size());
  for (std::size_t k = 0; k < fleet.size(); ++k) {
    compute[k] = fleet.compute_latency(k, batches[k]);
  }
  return equalize_slots(compute, fleet.up_rate, fleet.bits,
                        fleet.frames.uplink_s)
      .period_s;
}

// Rounds a continuous split of an integer global batch to integers: round
// every batch up, take the surplus back from the batches that were rounded up
// the most, then move single samples between devices while that shortens the
// uplink subperiod.
std::vector<double> integer_batches(const AffineFleet& fleet,
                                    std::span<const double> relaxed,
                                    double global_batch) {
  const std::size_t n = fleet.size();
  std::vector<double> b(n);
  std::vector<double> gain(n);
  for (std::size_t k = 0; k < n; ++k) {
    b[k] = std::clamp(std::ceil(relaxed[k] - 1e-9), fleet.lo[k], fleet.hi[k]);
    gain[k] = b[k] - relaxed[k];
  }
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t i, std::size_t j) { return gain[i] > gain[j]; });

  long surplus = std::lround(sum(b) - global_batch);
  for (std::size_t pass = 0; surplus > 0 && pass < n; ++pass) {
    for (std::size_t idx : order) {
      if (surplus == 0) break;
      if (b[idx] - 1.0 >= fleet.lo[idx]) {
        b[idx] -= 1.0;
        --surplus;
      }
    }
  }
  for (std::size_t pass = 0; surplus < 0 && pass < n; ++pass) {
    for (auto it = order.rbegin(); it != order.rend() && surplus < 0; ++it) {
      if (b[*it] + 1.0 <= fleet.hi[*it]) {
        b[*it] += 1.0;
        ++surplus;
      }
    }
  }
  if (surplus != 0) throw Infeasible("integer batch repair failed");

  double best = uplink_period(fleet, b);
  for (std::size_t round = 0; round < 4 * n; ++round) {
    std::size_t from = n;
    std::size_t to = n;
    double candidate = best;
    for (std::size_t i = 0; i < n; ++i) {
      if (b[i] - 1.0 < fleet.lo[i]) continue;
      for (std::size_t j = 0; j < n; ++j) {
        if (j == i || b[j] + 1.0 > fleet.hi[j]) continue;
        b[i] -= 1.0;
        b[j] += 1.0;
        const double period = uplink_period(fleet, b);
        b[i] += 1.0;
        b[j] -= 1.0;
        if (period < candidate * (1.0 - 1e-12)) {
          candidate = period;
          from = i;
          to = j;
        }
      }
    }
    if (from == n) break;
    b[from] -= 1.0;
    b[to] += 1.0;
    best = candidate;
  }
  return b;
}

void check_range(const AffineFleet& fleet, double global_batch,
                 const Tolerance& tol) {
  if (global_batch < fleet.batch_floor() - tol.batch ||
      global_batch > fleet.batch_ceil() + tol.batch) {
    std::ostringstream os;
    os << "global batch " << global_batch << " outside feasible range ["
       << fleet.batch_floor() << ", " << fleet.batch_ceil() << "]";
    throw Infeasible(os.str());
  }
}

}  // namespace

RoundPlan plan_at_batch(const AffineFleet& fleet, double global_batch,
                        const SolveOptions& opts) {
  check_range(fleet, global_batch, opts.tol);
  if (opts.rounding == BatchRounding::Continuous) {
    return assemble(fleet, solve_uplink(fleet, global_batch, opts.tol),
                    solve_downlink(fleet, global_batch, opts.tol));
  }
  if (!near_integer(global_batch)) {
    throw InvalidArgument("integer batch rounding needs an integer global "
                          "batch, got " + std::to_string(global_batch));
  }
  const double b = std::round(global_batch);
  const UplinkAllocation relaxed = solve_uplink(fleet, b, opts.tol);
  const std::vector<double> batches = integer_batches(fleet, relaxed.batch, b);
  UplinkAllocation up = uplink_for_batches(fleet, batches, SlotPolicy::Optimal);
  up.global_batch = b;
  up.mu_star = relaxed.mu_star;
  up.degenerate = relaxed.degenerate;
  return assemble(fleet, std::move(up), solve_downlink(fleet, b, opts.tol));
}

RoundPlan plan_for_batches(const AffineFleet& fleet,
                           std::span<const double> batches, SlotPolicy policy,
                           const Tolerance& tol) {
  UplinkAllocation up = uplink_for_batches(fleet, batches, policy);
  DownlinkAllocation down =
      downlink_for_policy(fleet, up.global_batch, policy, tol);
  return assemble(fleet, std::move(up), std::move(down));
}

RoundPlan optimize(const AffineFleet& fleet, const SolveOptions& opts) {
  const double lo = fleet.batch_floor();
  const double hi = fleet.batch_ceil();
  if (fleet.size() == 0) throw InvalidArgument("optimize: empty fleet");
  if (lo > hi) throw Infeasible("optimize: lower batch bounds exceed upper");

  // The downlink subperiod does not depend on B.
  const double down_period =
      equalize_slots(fleet.update_s, fleet.down_rate, fleet.bits,
                     fleet.frames.downlink_s)
          .period_s;
  auto relaxed_efficiency = [&](double b) {
    const UplinkAllocation up = solve_uplink(fleet, b, opts.tol);
    const double delta = fleet.delta_loss(b);
    return delta / (delta * up.eu_star + down_period);
  };

  // Golden-section search on the relaxed efficiency, endpoints kept as
  // candidates in case the maximum sits on the boundary.
  double best_b = lo;
  double best_e = relaxed_efficiency(lo);
  if (hi > lo) {
    const double e_hi = relaxed_efficiency(hi);
    if (e_hi > best_e) {
      best_b = hi;
      best_e = e_hi;
    }
    const double phi = 0.5 * (std::sqrt(5.0) - 1.0);
    double a = lo;
    double b = hi;
    double c = b - phi * (b - a);
    double d = a + phi * (b - a);
    double fc = relaxed_efficiency(c);
    double fd = relaxed_efficiency(d);
    while (b - a > 1e-7 * std::max(1.0, b)) {
      if (fc >= fd) {
        b = d;
        d = c;
        fd = fc;
        c = b - phi * (b - a);
        fc = relaxed_efficiency(c);
      } else {
        a = c;
        c = d;
        fc = fd;
        d = a + phi * (b - a);
        fd = relaxed_efficiency(d);
      }
    }
    const double mid = 0.5 * (a + b);
    const double e_mid = relaxed_efficiency(mid);
    if (e_mid > best_e) {
      best_b = mid;
      best_e = e_mid;
    }
  }

  if (opts.rounding == BatchRounding::Continuous) {
    return plan_at_batch(fleet, best_b, opts);
  }

  // Integer global batch: scan a window around the relaxed argmax.
  const double reach = std::max<double>(static_cast<double>(fleet.size()), 4.0);
  const double w_lo = std::max(lo, std::floor(best_b) - reach);
  const double w_hi = std::min(hi, std::ceil(best_b) + reach);

  RoundPlan best;
  bool have = false;
  auto consider = [&](double b) {
    RoundPlan p = plan_at_batch(fleet, b, opts);
    if (!have || p.efficiency > best.efficiency) {
      best = std::move(p);
      have = true;
    }
  };
  for (double b = w_lo; b <= w_hi; b += 1.0) consider(b);

  const double chosen = best.uplink.global_batch;
  const bool edge = (chosen == w_lo && w_lo > lo) || (chosen == w_hi && w_hi < hi);
  if (edge) {
    if (hi - lo + 1.0 <= 4096.0) {
      for (double b = lo; b <= hi; b += 1.0) {
        if (b < w_lo || b > w_hi) consider(b);
      }
    } else {
      // Walk outward while the efficiency keeps improving.
      const double step = chosen == w_lo ? -1.0 : 1.0;
      for (double b = chosen + step; b >= lo && b <= hi; b += step) {
        const double before = best.efficiency;
        consider(b);
        if (!(best.efficiency > before)) break;
      }
    }
  }
  return best;
}

KktReport kkt_residuals(const AffineFleet& fleet, const RoundPlan& plan) {
  const std::size_t n = fleet.size();
  const UplinkAllocation& up = plan.uplink;
  const DownlinkAllocation& down = plan.downlink;
  if (up.batch.size() != n || up.slot_s.size() != n || down.slot_s.size() != n) {
    throw InvalidArgument("kkt_residuals: plan does not match the fleet");
  }
  const double delta = fleet.delta_loss(up.global_batch);
  const double s = fleet.bits;
  const double tu = fleet.frames.uplink_s;
  const double td = fleet.frames.downlink_s;
  KktReport r;

  // Complementary slackness of the per-device latency constraints: every
  // multiplier is positive when its slot is, so each constraint is tight.
  const double x_up = delta * up.eu_star;
  const double x_down = delta * down.ed_star;
  double slot_sq = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    const double t_up = fleet.compute_latency(k, up.batch[k]) +
                        s * tu / (up.slot_s[k] * fleet.up_rate[k]);
    r.complementary_slackness_residuals.push_back(std::abs(t_up / x_up - 1.0));
    slot_sq += fleet.up_rate[k] * up.slot_s[k] * up.slot_s[k] / (s * tu);
  }
  for (std::size_t k = 0; k < n; ++k) {
    const double t_down = s * td / (down.slot_s[k] * fleet.down_rate[k]) +
                          fleet.update_s[k];
    r.complementary_slackness_residuals.push_back(std::abs(t_down / x_down - 1.0));
  }

  // Slot stationarity gives lambda_k = mu R_k tau_k^2 / (s T_f); the E^U
  // stationarity fixes the scale of mu.
  r.mu = 1.0 / (delta * slot_sq);
  double lambda_sum = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    r.lambda.push_back(r.mu * fleet.up_rate[k] * up.slot_s[k] * up.slot_s[k] / (s * tu));
    lambda_sum += r.lambda.back();
  }
  r.dual_normalization_residual = std::abs(delta * lambda_sum - 1.0);

  // Batch stationarity: lambda_k / V_k + gamma = 0 for unclamped batches,
  // >= 0 at the lower bound and <= 0 at the upper bound.
  enum class Side { Lower, Inside, Upper };
  std::vector<Side> side(n);
  std::vector<double> ratio(n);
  double inside_sum = 0.0;
  std::size_t inside = 0;
  double max_upper = -kInf;
  double min_lower = kInf;
  for (std::size_t k = 0; k < n; ++k) {
    ratio[k] = r.lambda[k] / fleet.speed[k];
    const double eps = 1e-9 * std::max(1.0, fleet.hi[k]);
    if (up.batch[k] <= fleet.lo[k] + eps) {
      side[k] = Side::Lower;
      min_lower = std::min(min_lower, ratio[k]);
    } else if (up.batch[k] >= fleet.hi[k] - eps) {
      side[k] = Side::Upper;
      max_upper = std::max(max_upper, ratio[k]);
    } else {
      side[k] = Side::Inside;
      inside_sum += ratio[k];
      ++inside;
    }
  }
  const double total_speed = sum(fleet.speed);
  double g;  // -gamma
  if (!up.degenerate && std::isfinite(up.mu_star) && up.mu_star > 0.0) {
    g = r.mu / (delta * up.mu_star * total_speed);
  } else if (inside > 0) {
    g = inside_sum / static_cast<double>(inside);
  } else if (std::isfinite(max_upper) && std::isfinite(min_lower)) {
    g = 0.5 * (max_upper + min_lower);
  } else {
    g = std::isfinite(min_lower) ? min_lower : max_upper;
  }
  r.gamma = -g;
  for (std::size_t k = 0; k < n; ++k) {
    const double rel = ratio[k] / g;
    switch (side[k]) {
      case Side::Inside: r.stationarity_residuals.push_back(std::abs(rel - 1.0)); break;
      case Side::Lower: r.stationarity_residuals.push_back(pos(1.0 - rel)); break;
      case Side::Upper: r.stationarity_residuals.push_back(pos(rel - 1.0)); break;
    }
  }

  double bound = 0.0;
  double negative_slot = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    bound = std::max(bound, pos(fleet.lo[k] - up.batch[k]) / fleet.lo[k]);
    bound = std::max(bound, pos(up.batch[k] - fleet.hi[k]) / fleet.hi[k]);
    negative_slot = std::max(negative_slot, pos(-up.slot_s[k]) / tu);
    negative_slot = std::max(negative_slot, pos(-down.slot_s[k]) / td);
  }
  r.primal_feasibility_violations = {
      std::abs(sum(up.slot_s) / tu - 1.0),
      std::abs(sum(down.slot_s) / td - 1.0),
      std::abs(sum(up.batch) - up.global_batch) / up.global_batch,
      bound,
      negative_slot,
  };

  double worst = r.dual_normalization_residual;
  for (double v : r.stationarity_residuals) worst = std::max(worst, v);
  for (double v : r.complementary_slackness_residuals) worst = std::max(worst, v);
  for (double v : r.primal_feasibility_violations) worst = std::max(worst, v);
  r.max_abs_residual = worst;
  return r;
}

}  // namespace feel::detail
