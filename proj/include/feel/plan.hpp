#pragma once

#include <vector>

#include "feel/latency.hpp"

namespace feel {

/// Joint batchsize / uplink slot decision for one global batch B.
struct UplinkAllocation {
  std::vector<double> batch;     // B_k
  std::vector<double> slot_s;    // tau_k^U
  std::vector<double> speed;     // V_k, samples per second
  std::vector<double> priority;  // rho_k = V_k / sum V
  double global_batch = 0.0;
  /// Optimal maximum reciprocal uplink efficiency, seconds per loss unit.
  double eu_star = 0.0;
  /// Time-sharing multiplier in the closed-form batch rule.
  double mu_star = 0.0;
  /// Every device sits on a batch bound (B == sum lo or sum hi); mu_star is
  /// then the edge of its bracket rather than a unique root.
  bool degenerate = false;
};

struct DownlinkAllocation {
  std::vector<double> slot_s;  // tau_k^D
  double ed_star = 0.0;
};

struct RoundPlan {
  UplinkAllocation uplink;
  DownlinkAllocation downlink;
  latency::LatencyBreakdown latency;
  double delta_loss = 0.0;
  double efficiency = 0.0;  // delta_loss / latency.round_total_s
};

/// First-order optimality residuals of a plan, all dimensionless.
struct KktReport {
  /// Batch stationarity per device: lambda_k / V_k against the batch-sum
  /// multiplier, with sign conditions at clamped batches.
  std::vector<double> stationarity_residuals;
  /// |latency_k / (dL * E) - 1| per device, uplink then downlink.
  std::vector<double> complementary_slackness_residuals;
  /// Time sharing (up, down), batch sum, batch bounds, slot sign.
  std::vector<double> primal_feasibility_violations;
  /// |xi sqrt(B) sum(lambda) - 1|.
  double dual_normalization_residual = 0.0;
  std::vector<double> lambda;  // latency-constraint multipliers
  double mu = 0.0;             // time-sharing multiplier
  double gamma = 0.0;          // batch-sum multiplier
  double max_abs_residual = 0.0;
};

}  // namespace feel
