#pragma once

#include <cmath>
#include <cstdint>
#include <string>

#include "wavestate/errors.hpp"
#include "wavestate/network.hpp"

namespace wavestate::nn {

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

struct OptimizerState {
  AdamConfig config;
  ParameterSet first_moment;
  ParameterSet second_moment;
  std::uint64_t step = 0;
};

inline OptimizerState make_optimizer(const Network& net, AdamConfig config = {}) {
  if (!(config.learning_rate > 0.0)) throw InvalidArgument("learning rate must be positive");
  return {config, zero_parameters(net), zero_parameters(net), 0};
}

// One bias-corrected adaptive-moment update. Gradients are validated before
// anything is mutated, so a rejected step leaves params and state untouched.
inline void optimizer_step(OptimizerState& state, ParameterSet& params, const ParameterSet& grads) {
  if (grads.size() != params.size() || state.first_moment.size() != params.size())
    throw ShapeError(-1, "gradient set does not match parameter set");
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (grads[i].weight.shape() != params[i].weight.shape() || grads[i].bias.shape() != params[i].bias.shape())
      throw ShapeError(static_cast<std::ptrdiff_t>(i), "gradient shape does not match parameter shape");
    if (!grads[i].weight.all_finite() || !grads[i].bias.all_finite())
      throw NonFiniteError("non-finite gradient for layer " + std::to_string(i));
  }

  const auto& c = state.config;
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double correction1 = 1.0 - std::pow(c.beta1, t);
  const double correction2 = 1.0 - std::pow(c.beta2, t);

  auto update = [&](Tensor& theta, Tensor& m, Tensor& v, const Tensor& g) {
    for (std::size_t k = 0; k < theta.size(); ++k) {
      m[k] = c.beta1 * m[k] + (1.0 - c.beta1) * g[k];
      v[k] = c.beta2 * v[k] + (1.0 - c.beta2) * g[k] * g[k];
      const double m_hat = m[k] / correction1;
      const double v_hat = v[k] / correction2;
      theta[k] -= c.learning_rate * m_hat / (std::sqrt(v_hat) + c.epsilon);
    }
  };
  for (std::size_t i = 0; i < params.size(); ++i) {
    update(params[i].weight, state.first_moment[i].weight, state.second_moment[i].weight, grads[i].weight);
    update(params[i].bias, state.first_moment[i].bias, state.second_moment[i].bias, grads[i].bias);
  }
}

}  // namespace wavestate::nn
