#pragma once

#include <chrono>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "wavestate/errors.hpp"
#include "wavestate/metrics.hpp"
#include "wavestate/models.hpp"
#include "wavestate/network.hpp"
#include "wavestate/optimizer.hpp"
#include "wavestate/parallel.hpp"
#include "wavestate/pipeline.hpp"
#include "wavestate/rng.hpp"

namespace wavestate {

struct TrainConfig {
  std::size_t epochs = 60;
  std::size_t batch_size = 16;
  double learning_rate = 1e-3;
  std::uint64_t seed = 20240601;
  std::optional<std::size_t> patience;  // stop after this many epochs without improvement
  std::size_t threads = 0;              // 0 = hardware concurrency; results do not depend on it

  void validate() const {
    if (batch_size < 1) throw InvalidArgument("batch size must be >= 1");
    if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) throw InvalidArgument("learning rate must be positive");
  }

  friend bool operator==(const TrainConfig&, const TrainConfig&) = default;
};

struct FitResult {
  nn::ParameterSet params;          // parameters of the best epoch
  std::vector<double> loss;         // full-set MSE after each epoch; loss[0] is before training
  std::vector<double> best_loss;    // running minimum of `loss`
  std::size_t best_epoch = 0;
  std::size_t epochs_run = 0;
  double seconds_per_epoch = 0.0;   // wall time; never written to deterministic outputs
};

// Called after every epoch (including epoch 0) with the current parameters.
using EpochObserver = std::function<void(std::size_t epoch, const nn::ParameterSet&)>;

namespace detail {

inline void add_into(nn::ParameterSet& acc, const nn::ParameterSet& g) {
  for (std::size_t i = 0; i < acc.size(); ++i) {
    auto a = acc[i].weight.values();
    auto b = g[i].weight.values();
    for (std::size_t k = 0; k < a.size(); ++k) a[k] += b[k];
    auto ab = acc[i].bias.values();
    auto bb = g[i].bias.values();
    for (std::size_t k = 0; k < ab.size(); ++k) ab[k] += bb[k];
  }
}

}  // namespace detail

// Mean squared error over every element of every example.
inline double mean_squared_error(const nn::Network& net, const nn::ParameterSet& params,
                                 const std::vector<Tensor>& inputs, const std::vector<Tensor>& targets,
                                 std::size_t threads = 0) {
  if (inputs.size() != targets.size()) throw InvalidArgument("input and target counts differ");
  if (inputs.empty()) throw InvalidArgument("cannot evaluate on zero examples");
  std::vector<double> sse(inputs.size());
  parallel_for(
      inputs.size(),
      [&](std::size_t i) {
        const Tensor y = nn::forward(net, params, inputs[i]);
        double s = 0.0;
        for (std::size_t k = 0; k < y.size(); ++k) s += (y[k] - targets[i][k]) * (y[k] - targets[i][k]);
        sse[i] = s;
      },
      threads);
  const double total = std::accumulate(sse.begin(), sse.end(), 0.0);
  return total / static_cast<double>(inputs.size() * targets.front().size());
}

// Minibatch Adam on mean squared error. Each epoch visits the examples in a
// seeded random order; per-example gradients are summed in batch order, so
// the result depends only on the seed and never on the thread count.
inline FitResult fit_mse(const nn::Network& net, nn::ParameterSet params, const std::vector<Tensor>& inputs,
                         const std::vector<Tensor>& targets, const TrainConfig& cfg,
                         const EpochObserver& observer = nullptr) {
  cfg.validate();
  nn::check_parameters(net, params);
  if (inputs.size() != targets.size()) throw InvalidArgument("input and target counts differ");
  if (inputs.empty()) throw InvalidArgument("cannot train on zero examples");
  const Shape out_shape = net.output_shape();
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    if (inputs[i].shape() != net.input_shape)
      throw ShapeError(-1, "example " + std::to_string(i) + " has shape " + shape_string(inputs[i].shape()) +
                               ", network expects " + shape_string(net.input_shape));
    if (targets[i].shape() != out_shape)
      throw ShapeError(static_cast<std::ptrdiff_t>(net.layers.size()) - 1,
                       "target " + std::to_string(i) + " has shape " + shape_string(targets[i].shape()) +
                           ", network produces " + shape_string(out_shape));
  }

  auto evaluate = [&](std::size_t epoch, const nn::ParameterSet& p) {
    double loss;
    try {
      loss = mean_squared_error(net, p, inputs, targets, cfg.threads);
    } catch (const NonFiniteError& e) {
      throw DivergenceError(epoch, e.what());
    }
    if (!std::isfinite(loss)) throw DivergenceError(epoch, "non-finite loss");
    return loss;
  };

  FitResult r;
  r.params = params;
  r.loss.push_back(evaluate(0, params));
  r.best_loss.push_back(r.loss.back());
  if (observer) observer(0, params);

  auto opt = nn::make_optimizer(net, {cfg.learning_rate});
  const double scale = 2.0 / static_cast<double>(shape_size(out_shape));
  std::vector<std::size_t> order(inputs.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::vector<nn::ParameterSet> slot_grads(std::min(cfg.batch_size, inputs.size()));

  const auto start = std::chrono::steady_clock::now();
  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    Rng rng(hash_seed(cfg.seed, {0x5EED, epoch}));
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.engine()() % i]);

    try {
      for (std::size_t b0 = 0; b0 < order.size(); b0 += cfg.batch_size) {
        const std::size_t b1 = std::min(order.size(), b0 + cfg.batch_size);
        const double batch_scale = scale / static_cast<double>(b1 - b0);
        parallel_for(
            b1 - b0,
            [&](std::size_t j) {
              const std::size_t idx = order[b0 + j];
              nn::ForwardCache cache;
              const Tensor y = nn::forward(net, params, inputs[idx], &cache);
              Tensor g(y.shape());
              for (std::size_t k = 0; k < y.size(); ++k) g[k] = batch_scale * (y[k] - targets[idx][k]);
              slot_grads[j] = nn::backward(net, params, cache, g).params;
            },
            cfg.threads);
        nn::ParameterSet total = std::move(slot_grads[0]);
        for (std::size_t j = 1; j < b1 - b0; ++j) detail::add_into(total, slot_grads[j]);
        nn::optimizer_step(opt, params, total);
      }
    } catch (const NonFiniteError& e) {
      throw DivergenceError(epoch, e.what());
    }

    const double loss = evaluate(epoch, params);
    r.loss.push_back(loss);
    r.epochs_run = epoch;
    if (loss < r.best_loss.back()) {
      r.best_loss.push_back(loss);
      r.best_epoch = epoch;
      r.params = params;
    } else {
      r.best_loss.push_back(r.best_loss.back());
    }
    if (observer) observer(epoch, params);
    if (cfg.patience && epoch - r.best_epoch >= *cfg.patience) break;
  }
  if (r.epochs_run > 0)
    r.seconds_per_epoch = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count() /
                          static_cast<double>(r.epochs_run);
  return r;
}

// ---------------------------------------------------------------------------
// Convolutional autoencoder

// Encoder and decoder chained into one network so both train on the
// reconstruction loss.
inline nn::Network autoencoder_network(const CaeNetworks& cae) {
  nn::Network net{cae.encoder.input_shape, cae.encoder.layers};
  net.layers.insert(net.layers.end(), cae.decoder.layers.begin(), cae.decoder.layers.end());
  return net;
}

inline std::vector<Tensor> model_rows(const InputTensor& t) {
  std::vector<Tensor> rows;
  rows.reserve(t.rows());
  for (std::size_t i = 0; i < t.rows(); ++i) rows.push_back(t.row(i));
  return rows;
}

struct CaeTrainResult {
  CaeModel model;
  FitResult fit;
};

inline CaeTrainResult train_cae(const CaeModel& init, const InputTensor& train, const TrainConfig& cfg) {
  if (train.layout != init.spec.model_type)
    throw ShapeError(-1, "layout mismatch: tensor is Type " + to_string(train.layout) + ", model is Type " +
                             to_string(init.spec.model_type));
  if (train.signal_length() != init.spec.signal_length)
    throw ShapeError(-1, "signal length " + std::to_string(train.signal_length()) + " does not match model length " +
                             std::to_string(init.spec.signal_length));
  const nn::Network net = autoencoder_network(init.networks);
  nn::ParameterSet params = init.encoder_params;
  params.insert(params.end(), init.decoder_params.begin(), init.decoder_params.end());
  const auto rows = model_rows(train);

  CaeTrainResult r{init, fit_mse(net, std::move(params), rows, rows, cfg)};
  const auto split = static_cast<std::ptrdiff_t>(init.encoder_params.size());
  r.model.encoder_params.assign(r.fit.params.begin(), r.fit.params.begin() + split);
  r.model.decoder_params.assign(r.fit.params.begin() + split, r.fit.params.end());
  return r;
}

inline CaeTrainResult train_cae(const CaeSpec& spec, const InputTensor& train, const TrainConfig& cfg) {
  return train_cae(make_cae_model(spec, cfg.seed), train, cfg);
}

// Flattened bottleneck output of every row.
inline std::vector<std::vector<double>> compute_latents(const CaeModel& m, const InputTensor& t,
                                                        std::size_t threads = 0) {
  std::vector<std::vector<double>> out(t.rows());
  parallel_for(t.rows(), [&](std::size_t i) { out[i] = encode(m, t.row(i)).flat(); }, threads);
  return out;
}

// (level, load kN) plus the path index for Type I rows.
inline std::vector<double> state_row(const StateVector& s, ModelType layout) {
  std::vector<double> v{static_cast<double>(s.level), static_cast<double>(s.load_kn)};
  if (layout == ModelType::TypeI) {
    if (!s.path) throw InvalidArgument("Type I state needs a path index");
    v.push_back(static_cast<double>(*s.path));
  }
  return v;
}

inline std::vector<std::vector<double>> state_rows(const InputTensor& t) {
  std::vector<std::vector<double>> out;
  out.reserve(t.rows());
  for (const auto& s : t.labels) out.push_back(state_row(s, t.layout));
  return out;
}

// ---------------------------------------------------------------------------
// Feedforward regressors

struct FfnnTrainResult {
  FfnnModel model;
  FitResult fit;                      // loss in standardised units
  std::vector<double> rmse_history;   // training RMSE in original units, per epoch
  double train_rmse = 0.0;
  std::optional<double> heldout_rmse;
};

inline double ffnn_rmse(const FfnnModel& m, const std::vector<std::vector<double>>& x,
                        const std::vector<std::vector<double>>& y) {
  if (x.size() != y.size()) throw InvalidArgument("input and target counts differ");
  std::vector<double> pred, truth;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const auto p = predict(m, x[i]);
    pred.insert(pred.end(), p.begin(), p.end());
    truth.insert(truth.end(), y[i].begin(), y[i].end());
  }
  return rmse(pred, truth);
}

// Inputs and targets are standardised per column on the training rows; the
// returned model undoes the scaling, so predictions are in original units.
inline FfnnTrainResult train_ffnn(const FfnnSpec& spec, const std::vector<std::vector<double>>& inputs,
                                  const std::vector<std::vector<double>>& targets, const TrainConfig& cfg,
                                  const std::vector<std::vector<double>>* heldout_inputs = nullptr,
                                  const std::vector<std::vector<double>>* heldout_targets = nullptr) {
  if (inputs.size() != targets.size()) throw InvalidArgument("input and target counts differ");
  if (inputs.empty()) throw InvalidArgument("cannot train on zero examples");
  for (std::size_t i = 0; i < inputs.size(); ++i)
    if (inputs[i].size() != spec.input_width || targets[i].size() != spec.output_width)
      throw ShapeError(-1, "example " + std::to_string(i) + " is " + std::to_string(inputs[i].size()) + " -> " +
                               std::to_string(targets[i].size()) + ", network is " +
                               std::to_string(spec.input_width) + " -> " + std::to_string(spec.output_width));
  if ((heldout_inputs == nullptr) != (heldout_targets == nullptr))
    throw InvalidArgument("held-out inputs and targets must be given together");

  FfnnTrainResult r{make_ffnn_model(spec, cfg.seed), {}, {}, 0.0, std::nullopt};
  r.model.input_scaling = Scaling::fit(inputs);
  r.model.output_scaling = Scaling::fit(targets);

  std::vector<Tensor> x, y;
  x.reserve(inputs.size());
  y.reserve(inputs.size());
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    x.emplace_back(Shape{spec.input_width}, r.model.input_scaling.apply(inputs[i]));
    y.emplace_back(Shape{spec.output_width}, r.model.output_scaling.apply(targets[i]));
  }
  FfnnModel probe = r.model;
  r.fit = fit_mse(r.model.network, r.model.params, x, y, cfg, [&](std::size_t, const nn::ParameterSet& p) {
    probe.params = p;
    r.rmse_history.push_back(ffnn_rmse(probe, inputs, targets));
  });
  r.model.params = r.fit.params;
  r.train_rmse = ffnn_rmse(r.model, inputs, targets);
  if (heldout_inputs) r.heldout_rmse = ffnn_rmse(r.model, *heldout_inputs, *heldout_targets);
  return r;
}

// ---------------------------------------------------------------------------
// The three networks together

struct FrameworkConfig {
  CaeSpec cae;
  FfnnSpec ffnn;  // hidden stack only; widths follow from the CAE
  TrainConfig cae_train{60, 4, 1e-3, 20240601, std::nullopt, 0};
  TrainConfig ffnn_train{300, 4, 1e-3, 20240601, std::nullopt, 0};

  friend bool operator==(const FrameworkConfig&, const FrameworkConfig&) = default;
};

struct Framework {
  CaeModel cae;
  FfnnModel estimator;  // latent -> state
  FfnnModel generator;  // state -> latent
};

struct FrameworkTrainResult {
  Framework framework;
  FitResult cae_fit;
  FfnnTrainResult estimator_fit;
  FfnnTrainResult generator_fit;
};

// Estimator spec for a CAE: flattened latent in, state out.
inline FfnnSpec estimator_spec(const FfnnSpec& hidden, const CaeSpec& cae) {
  FfnnSpec s = hidden;
  s.input_width = shape_size(latent_shape(cae));
  s.output_width = state_width(cae.model_type);
  return s;
}

// CAE first; its encoder is then frozen and the two regressors are fitted
// on its latents.
inline FrameworkTrainResult train_framework(const InputTensor& train, const FrameworkConfig& cfg) {
  auto cae = train_cae(cfg.cae, train, cfg.cae_train);
  const auto latents = compute_latents(cae.model, train, cfg.cae_train.threads);
  const auto states = state_rows(train);
  const FfnnSpec est = estimator_spec(cfg.ffnn, cfg.cae);
  TrainConfig est_cfg = cfg.ffnn_train;
  est_cfg.seed = hash_seed(cfg.ffnn_train.seed, {1});
  TrainConfig gen_cfg = cfg.ffnn_train;
  gen_cfg.seed = hash_seed(cfg.ffnn_train.seed, {2});
  auto estimator = train_ffnn(est, latents, states, est_cfg);
  auto generator = train_ffnn(est.mirrored(), states, latents, gen_cfg);
  return {{cae.model, estimator.model, generator.model}, std::move(cae.fit), std::move(estimator),
          std::move(generator)};
}

}  // namespace wavestate
