#pragma once

#include <span>

namespace feel::loss {

/// Proxy for training progress: each round lowers the global loss by
/// xi * sqrt(B), never below floor_loss.
struct LossProxy {
  double xi = 1.0;
  double initial_loss = 2.3;
  double floor_loss = 0.0;
};

/// Learning rate grows with the square root of the global batch.
struct LearningRateRule {
  double base_rate = 0.1;
  double reference_batch = 64;
};

/// One observed (global batch, loss decay) pair for calibrating xi.
struct DecaySample {
  double global_batch = 1.0;
  double delta_loss = 0.0;
};

void validate(const LossProxy& proxy);
void validate(const LearningRateRule& rule);

double loss_decay(const LossProxy& proxy, double global_batch);

double learning_rate(const LearningRateRule& rule, double global_batch);

/// Loss decay per second of round latency.
double learning_efficiency(double delta_loss, double round_latency_s);

/// One proxy step: max(loss - dL, floor).
double next_loss(const LossProxy& proxy, double loss, double delta_loss);

/// Least-squares xi for dL = xi * sqrt(B): sum(dL sqrt(B)) / sum(B).
double calibrate_xi(std::span<const DecaySample> samples);

}  // namespace feel::loss
