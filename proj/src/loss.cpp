#include "feel/loss.hpp"

#include <algorithm>
#include <cmath>

#include "feel/error.hpp"

namespace feel::loss {

void validate(const LossProxy& proxy) {
  if (!(proxy.xi > 0.0) || !std::isfinite(proxy.xi)) {
    throw InvalidArgument("loss proxy: xi must be positive");
  }
  if (!(proxy.floor_loss >= 0.0) || !(proxy.initial_loss > proxy.floor_loss)) {
    throw InvalidArgument("loss proxy: need initial_loss > floor_loss >= 0");
  }
}

void validate(const LearningRateRule& rule) {
  if (!(rule.base_rate > 0.0) || !(rule.reference_batch >= 1.0)) {
    throw InvalidArgument("learning-rate rule: need base_rate > 0, "
                          "reference_batch >= 1");
  }
}

double loss_decay(const LossProxy& proxy, double global_batch) {
  if (!(global_batch >= 1.0)) {
    throw InvalidArgument("loss_decay: global batch must be >= 1");
  }
  if (!(proxy.xi > 0.0) || !std::isfinite(proxy.xi)) {
    throw InvalidArgument("loss_decay: xi must be positive");
  }
  return proxy.xi * std::sqrt(global_batch);
}

double learning_rate(const LearningRateRule& rule, double global_batch) {
  validate(rule);
  if (!(global_batch >= 1.0)) {
    throw InvalidArgument("learning_rate: global batch must be >= 1");
  }
  return rule.base_rate * std::sqrt(global_batch / rule.reference_batch);
}

double learning_efficiency(double delta_loss, double round_latency_s) {
  if (!(round_latency_s > 0.0)) {
    throw InvalidArgument("learning_efficiency: round latency must be > 0");
  }
  return delta_loss / round_latency_s;
}

double next_loss(const LossProxy& proxy, double loss, double delta_loss) {
  return std::max(loss - delta_loss, proxy.floor_loss);
}

double calibrate_xi(std::span<const DecaySample> samples) {
  double num = 0.0;
  double den = 0.0;
  for (const DecaySample& s : samples) {
    if (!(s.global_batch >= 1.0)) {
      throw InvalidArgument("calibrate_xi: global batch must be >= 1");
    }
    num += s.delta_loss * std::sqrt(s.global_batch);
    den += s.global_batch;
  }
  if (samples.empty()) throw InvalidArgument("calibrate_xi: no samples");
  const double xi = num / den;
  if (!(xi > 0.0)) {
    throw InvalidArgument("calibrate_xi: samples imply non-positive xi");
  }
  return xi;
}

}  // namespace feel::loss
