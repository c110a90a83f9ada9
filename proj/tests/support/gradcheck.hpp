#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <vector>

#include "wavestate/network.hpp"
#include "wavestate/rng.hpp"

// Central finite-difference oracle for nn::backward.
namespace wavestate::test_support {

struct GradCheck {
  double max_relative_error = 0.0;
  std::size_t checked = 0;
};

// Relative error with a floor on the denominator, so entries whose true
// gradient is ~0 are judged on absolute error.
inline double relative_error(double analytic, double numeric) {
  return std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), 1e-6});
}

inline Tensor random_tensor(const Shape& shape, Rng& rng, double scale = 1.0) {
  Tensor t(shape);
  for (auto& v : t.values()) v = rng.uniform(-scale, scale);
  return t;
}

// Checks every parameter and every input element of `net` for the scalar
// loss sum(upstream * output).
inline GradCheck gradient_check(const nn::Network& net, nn::ParameterSet params, Tensor input, const Tensor& upstream,
                                double h = 1e-5) {
  auto loss = [&](const nn::ParameterSet& p, const Tensor& x) {
    const Tensor y = nn::forward(net, p, x);
    double s = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) s += upstream[i] * y[i];
    return s;
  };
  nn::ForwardCache cache;
  nn::forward(net, params, input, &cache);
  const auto grads = nn::backward(net, params, cache, upstream);

  GradCheck r;
  auto probe = [&](double& slot, double analytic, const auto& eval) {
    const double saved = slot;
    slot = saved + h;
    const double up = eval();
    slot = saved - h;
    const double down = eval();
    slot = saved;
    r.max_relative_error = std::max(r.max_relative_error, relative_error(analytic, (up - down) / (2.0 * h)));
    ++r.checked;
  };
  auto eval = [&] { return loss(params, input); };
  for (std::size_t l = 0; l < params.size(); ++l) {
    for (std::size_t k = 0; k < params[l].weight.size(); ++k) probe(params[l].weight[k], grads.params[l].weight[k], eval);
    for (std::size_t k = 0; k < params[l].bias.size(); ++k) probe(params[l].bias[k], grads.params[l].bias[k], eval);
  }
  for (std::size_t k = 0; k < input.size(); ++k) probe(input[k], grads.input[k], eval);
  return r;
}

// A small network from one of six families covering every layer kind.
inline nn::Network random_network(Rng& rng, std::size_t index) {
  using nn::LayerSpec;
  auto pick = [&](std::size_t lo, std::size_t hi) {
    return lo + static_cast<std::size_t>(rng.uniform(0.0, static_cast<double>(hi - lo + 1)));
  };
  const auto tanh = LayerSpec::act(nn::Activation::Tanh);
  nn::Network net;
  switch (index % 6) {
    case 0:  // dense stack
      net.input_shape = {pick(1, 5)};
      net.layers = {LayerSpec::dense(pick(1, 6)), tanh, LayerSpec::dense(pick(1, 6)), tanh, LayerSpec::dense(pick(1, 3))};
      break;
    case 1:  // 1D encoder
      net.input_shape = {2 * pick(2, 4), pick(1, 2)};
      net.layers = {LayerSpec::conv1d(pick(1, 3)), tanh, LayerSpec::max_pool1d(2), LayerSpec::flatten(),
                    LayerSpec::dense(pick(1, 3))};
      break;
    case 2:  // 2D encoder
      net.input_shape = {2 * pick(1, 3), 3 * pick(1, 2), pick(1, 2)};
      net.layers = {LayerSpec::conv2d(pick(1, 3)), tanh, LayerSpec::max_pool2d(2, 3), LayerSpec::flatten(),
                    LayerSpec::dense(pick(1, 3))};
      break;
    case 3: {  // 1D decoder
      const std::size_t half = pick(2, 4), f = pick(1, 3);
      net.input_shape = {pick(1, 3)};
      net.layers = {LayerSpec::dense(half * f), tanh, LayerSpec::reshape({half, f}), LayerSpec::upsample1d(2),
                    LayerSpec::conv1d(pick(1, 2)), tanh, LayerSpec::conv1d(1)};
      break;
    }
    case 4: {  // 2D decoder
      const std::size_t h = pick(1, 3), f = pick(1, 2);
      net.input_shape = {pick(1, 3)};
      net.layers = {LayerSpec::dense(h * f), tanh, LayerSpec::reshape({h, 1, f}), LayerSpec::upsample2d(2, 3),
                    LayerSpec::conv2d(pick(1, 2)), tanh, LayerSpec::conv2d(1)};
      break;
    }
    default: {  // time-distributed grid encoder/decoder
      const std::size_t n = pick(2, 4), f = pick(1, 3);
      net.input_shape = {n, 3, 3, 1};
      net.layers = {LayerSpec::conv2d(pick(1, 3)), tanh, LayerSpec::max_pool2d(3, 3), LayerSpec::conv2d(f), tanh,
                    LayerSpec::reshape({n, f}), LayerSpec::dense(pick(1, 3)), LayerSpec::dense(f), tanh,
                    LayerSpec::reshape({n, 1, 1, f}), LayerSpec::upsample2d(3, 3), LayerSpec::conv2d(1)};
      break;
    }
  }
  return net;
}

struct SuiteResult {
  double worst = 0.0;
  std::size_t networks = 0;
  std::size_t checked = 0;
};

// Randomised networks, parameters (biases included) and inputs.
inline SuiteResult gradient_suite(std::size_t count, std::uint64_t seed) {
  SuiteResult s;
  for (std::size_t i = 0; i < count; ++i) {
    Rng rng(hash_seed(seed, {i}));
    const auto net = random_network(rng, i);
    auto params = nn::init_parameters(net, rng);
    for (auto& p : params)
      for (auto& v : p.bias.values()) v = rng.uniform(-0.5, 0.5);
    const Tensor input = random_tensor(net.input_shape, rng);
    const Tensor upstream = random_tensor(net.output_shape(), rng);
    const auto r = gradient_check(net, params, input, upstream);
    s.worst = std::max(s.worst, r.max_relative_error);
    s.checked += r.checked;
    ++s.networks;
  }
  return s;
}

}  // namespace wavestate::test_support
