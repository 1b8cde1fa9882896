#include "pullback/optimizer.hpp"

#include <cmath>
#include <string>

namespace pullback {

void adamw_step(Vector& params, const Vector& grads, AdamWState& state, double lr, const AdamWConfig& config) {
  require_same_length(params, grads, "adamw_step");
  if (!grads.allFinite()) {
    Eigen::Index bad = 0;
    while (bad < grads.size() && std::isfinite(grads[bad])) ++bad;
    throw TrainingDiverged("non-finite gradient at parameter " + std::to_string(bad) + " (step " +
                           std::to_string(state.step + 1) + ")");
  }
  if (state.first_moment.size() != params.size()) {
    state.first_moment = Vector::Zero(params.size());
    state.second_moment = Vector::Zero(params.size());
  }
  ++state.step;
  state.first_moment = config.beta1 * state.first_moment + (1.0 - config.beta1) * grads;
  state.second_moment = config.beta2 * state.second_moment + (1.0 - config.beta2) * grads.cwiseAbs2();
  const double c1 = 1.0 - std::pow(config.beta1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(config.beta2, static_cast<double>(state.step));

  params *= 1.0 - lr * config.weight_decay;
  params.array() -= lr * (state.first_moment.array() / c1) / ((state.second_moment.array() / c2).sqrt() + config.eps);
}

}  // namespace pullback
