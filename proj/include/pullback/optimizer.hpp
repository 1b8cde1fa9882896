#pragma once

#include <stdexcept>

#include "pullback/types.hpp"

namespace pullback {

struct AdamWConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.0;
};

struct AdamWState {
  Vector first_moment;
  Vector second_moment;
  long step = 0;
};

class TrainingDiverged : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// One AdamW update with decoupled weight decay and bias-corrected moments:
///   p <- p - lr * wd * p - lr * m_hat / (sqrt(v_hat) + eps).
/// Throws TrainingDiverged on non-finite gradients, leaving params untouched.
void adamw_step(Vector& params, const Vector& grads, AdamWState& state, double lr, const AdamWConfig& config);

}  // namespace pullback
