#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "wavestate/errors.hpp"
#include "wavestate/network.hpp"
#include "wavestate/rng.hpp"
#include "wavestate/tensor.hpp"

namespace wavestate {

// How the nine path signals of one measurement are arranged for the CAE.
//   TypeI   - every path signal is its own row: N x 1
//   TypeII  - the nine paths form a second axis: N x 9 x 1
//   TypeIII - the path axis is split into actuator x receiver: N x 3 x 3 x 1
enum class ModelType : std::uint8_t { TypeI = 1, TypeII = 2, TypeIII = 3 };

inline std::string to_string(ModelType t) {
  switch (t) {
    case ModelType::TypeI: return "I";
    case ModelType::TypeII: return "II";
    case ModelType::TypeIII: return "III";
  }
  return "?";
}

inline ModelType model_type_from_int(int v) {
  if (v < 1 || v > 3) throw InvalidArgument("model type must be 1, 2 or 3, got " + std::to_string(v));
  return static_cast<ModelType>(v);
}

struct CaeSpec {
  ModelType model_type = ModelType::TypeII;
  std::size_t latent_width = 7;
  std::size_t first_filters = 64;
  std::size_t dense_width = 32;  // hidden dense row between flatten and bottleneck (Types I/II)
  std::size_t signal_length = 800;

  std::size_t second_filters() const { return first_filters / 2; }

  void validate() const {
    if (latent_width < 1) throw InvalidArgument("latent width must be >= 1");
    if (first_filters < 2 || first_filters % 2) throw InvalidArgument("first_filters must be even and >= 2");
    if (dense_width < 1) throw InvalidArgument("dense width must be >= 1");
    if (signal_length < 1) throw InvalidArgument("signal length must be >= 1");
  }

  friend bool operator==(const CaeSpec&, const CaeSpec&) = default;
};

struct FfnnSpec {
  std::size_t input_width = 7;
  std::size_t output_width = 2;
  std::size_t hidden_width = 64;
  std::size_t hidden_depth = 5;
  nn::Activation hidden_activation = nn::Activation::Tanh;

  // Same hidden stack, input and output swapped.
  FfnnSpec mirrored() const {
    FfnnSpec m = *this;
    std::swap(m.input_width, m.output_width);
    return m;
  }

  friend bool operator==(const FfnnSpec&, const FfnnSpec&) = default;
};

// Number of state components the FFNNs see: (level, load) plus the path
// index for Type I, whose rows are single-path signals.
inline std::size_t state_width(ModelType t) { return t == ModelType::TypeI ? 3 : 2; }

struct CaeNetworks {
  nn::Network encoder;
  nn::Network decoder;
};

inline Shape input_row_shape(ModelType t, std::size_t n) {
  switch (t) {
    case ModelType::TypeI: return {n, 1};
    case ModelType::TypeII: return {n, 9, 1};
    case ModelType::TypeIII: return {n, 3, 3, 1};
  }
  return {};
}

inline Shape latent_shape(const CaeSpec& s) {
  if (s.model_type == ModelType::TypeIII) return {s.signal_length, s.latent_width};
  return {s.latent_width};
}

inline CaeNetworks build_cae(const CaeSpec& spec) {
  using nn::LayerSpec;
  using nn::Activation;
  spec.validate();
  const std::size_t n = spec.signal_length, f1 = spec.first_filters, f2 = spec.second_filters();
  const auto tanh = LayerSpec::act(Activation::Tanh);
  CaeNetworks cae;
  cae.encoder.input_shape = input_row_shape(spec.model_type, n);
  cae.decoder.input_shape = latent_shape(spec);
  auto& enc = cae.encoder.layers;
  auto& dec = cae.decoder.layers;

  switch (spec.model_type) {
    case ModelType::TypeI:
      if (n % 4) throw ShapeError(-1, "Type I needs a signal length divisible by 4");
      enc = {LayerSpec::conv1d(f1), tanh, LayerSpec::max_pool1d(2), LayerSpec::conv1d(f2), tanh,
             LayerSpec::max_pool1d(2), LayerSpec::flatten(), LayerSpec::dense(spec.dense_width), tanh,
             LayerSpec::dense(spec.latent_width)};
      dec = {LayerSpec::dense(spec.dense_width), tanh, LayerSpec::dense(n / 4 * f2), tanh,
             LayerSpec::reshape({n / 4, f2}), LayerSpec::upsample1d(2), LayerSpec::conv1d(f1), tanh,
             LayerSpec::upsample1d(2), LayerSpec::conv1d(1)};
      break;
    case ModelType::TypeII:
      if (n % 4) throw ShapeError(-1, "Type II needs a signal length divisible by 4");
      enc = {LayerSpec::conv2d(f1), tanh, LayerSpec::max_pool2d(2, 3), LayerSpec::conv2d(f2), tanh,
             LayerSpec::max_pool2d(2, 3), LayerSpec::flatten(), LayerSpec::dense(spec.dense_width), tanh,
             LayerSpec::dense(spec.latent_width)};
      dec = {LayerSpec::dense(spec.dense_width), tanh, LayerSpec::dense(n / 4 * f2), tanh,
             LayerSpec::reshape({n / 4, 1, f2}), LayerSpec::upsample2d(2, 3), LayerSpec::conv2d(f1), tanh,
             LayerSpec::upsample2d(2, 3), LayerSpec::conv2d(1)};
      break;
    case ModelType::TypeIII:
      // Convolution and pooling act on the 3x3 path grid only; the time axis
      // is carried through as a batch axis.
      enc = {LayerSpec::conv2d(f1), tanh, LayerSpec::max_pool2d(3, 3), LayerSpec::conv2d(f2), tanh,
             LayerSpec::reshape({n, f2}), LayerSpec::dense(spec.latent_width)};
      dec = {LayerSpec::dense(f2), tanh, LayerSpec::reshape({n, 1, 1, f2}), LayerSpec::conv2d(f1), tanh,
             LayerSpec::upsample2d(3, 3), LayerSpec::conv2d(1)};
      break;
  }
  cae.encoder.output_shapes();
  cae.decoder.output_shapes();
  return cae;
}

inline nn::Network build_ffnn(const FfnnSpec& spec) {
  if (spec.hidden_depth < 1) throw InvalidArgument("FFNN depth must be >= 1");
  if (spec.hidden_width < 1 || spec.input_width < 1 || spec.output_width < 1)
    throw InvalidArgument("FFNN widths must be >= 1");
  nn::Network net;
  net.input_shape = {spec.input_width};
  for (std::size_t i = 0; i < spec.hidden_depth; ++i) {
    net.layers.push_back(nn::LayerSpec::dense(spec.hidden_width));
    net.layers.push_back(nn::LayerSpec::act(spec.hidden_activation));
  }
  net.layers.push_back(nn::LayerSpec::dense(spec.output_width));
  return net;
}

enum class NetworkPart { Encoder, Decoder, All };

inline std::size_t count_parameters(const CaeNetworks& cae, NetworkPart which) {
  switch (which) {
    case NetworkPart::Encoder: return cae.encoder.parameter_count();
    case NetworkPart::Decoder: return cae.decoder.parameter_count();
    case NetworkPart::All: return cae.encoder.parameter_count() + cae.decoder.parameter_count();
  }
  return 0;
}

// One printable row of a layer table; activation layers are folded into
// the layer they follow, as in conventional summaries.
struct TableRow {
  std::string layer;
  Shape output_shape;
  std::size_t parameters = 0;
};

inline std::vector<TableRow> layer_table(const nn::Network& net, bool include_input) {
  std::vector<TableRow> rows;
  if (include_input) rows.push_back({"Input Layer", net.input_shape, 0});
  const auto shapes = net.output_shapes();
  const auto counts = net.layer_parameter_counts();
  for (std::size_t i = 0; i < net.layers.size(); ++i) {
    if (net.layers[i].kind == nn::LayerKind::Activation) continue;
    rows.push_back({std::string(nn::to_string(net.layers[i].kind)), shapes[i], counts[i]});
  }
  return rows;
}

// Time-invariant (D) or time-varying (N x D) bottleneck representation.
struct LatentVector {
  Tensor values;

  std::vector<double> flat() const { return values.to_vector(); }
  friend bool operator==(const LatentVector&, const LatentVector&) = default;
};

struct CaeModel {
  CaeSpec spec;
  CaeNetworks networks;
  nn::ParameterSet encoder_params;
  nn::ParameterSet decoder_params;
};

inline CaeModel make_cae_model(const CaeSpec& spec, std::uint64_t seed) {
  CaeModel m{spec, build_cae(spec), {}, {}};
  Rng rng(hash_seed(seed, {0xCAE}));
  m.encoder_params = nn::init_parameters(m.networks.encoder, rng);
  m.decoder_params = nn::init_parameters(m.networks.decoder, rng);
  return m;
}

inline LatentVector encode(const CaeModel& m, const Tensor& row) {
  if (row.shape() != m.networks.encoder.input_shape)
    throw ShapeError(-1, "layout mismatch: Type " + to_string(m.spec.model_type) + " expects " +
                             shape_string(m.networks.encoder.input_shape) + ", got " + shape_string(row.shape()));
  return {nn::forward(m.networks.encoder, m.encoder_params, row)};
}

inline Tensor decode(const CaeModel& m, const LatentVector& z) {
  if (z.values.shape() != m.networks.decoder.input_shape)
    throw ShapeError(-1, "latent shape " + shape_string(z.values.shape()) + " does not match " +
                             shape_string(m.networks.decoder.input_shape));
  return nn::forward(m.networks.decoder, m.decoder_params, z.values);
}

// Per-feature affine normalisation, x' = (x - offset) / scale.
struct Scaling {
  std::vector<double> offset;
  std::vector<double> scale;

  static Scaling identity(std::size_t n) { return {std::vector<double>(n, 0.0), std::vector<double>(n, 1.0)}; }

  // Column statistics of `rows`; constant columns get scale 1.
  static Scaling fit(const std::vector<std::vector<double>>& rows) {
    if (rows.empty()) throw InvalidArgument("cannot fit scaling on zero rows");
    const std::size_t n = rows.front().size();
    Scaling s{std::vector<double>(n, 0.0), std::vector<double>(n, 0.0)};
    for (const auto& r : rows)
      for (std::size_t j = 0; j < n; ++j) s.offset[j] += r[j];
    for (auto& v : s.offset) v /= static_cast<double>(rows.size());
    for (const auto& r : rows)
      for (std::size_t j = 0; j < n; ++j) s.scale[j] += (r[j] - s.offset[j]) * (r[j] - s.offset[j]);
    for (auto& v : s.scale) {
      v = std::sqrt(v / static_cast<double>(rows.size()));
      if (!(v > 1e-12)) v = 1.0;
    }
    return s;
  }

  std::vector<double> apply(std::span<const double> x) const {
    std::vector<double> out(x.size());
    for (std::size_t j = 0; j < x.size(); ++j) out[j] = (x[j] - offset[j]) / scale[j];
    return out;
  }
  std::vector<double> invert(std::span<const double> x) const {
    std::vector<double> out(x.size());
    for (std::size_t j = 0; j < x.size(); ++j) out[j] = x[j] * scale[j] + offset[j];
    return out;
  }

  friend bool operator==(const Scaling&, const Scaling&) = default;
};

struct FfnnModel {
  FfnnSpec spec;
  nn::Network network;
  nn::ParameterSet params;
  Scaling input_scaling;
  Scaling output_scaling;
};

inline FfnnModel make_ffnn_model(const FfnnSpec& spec, std::uint64_t seed) {
  FfnnModel m{spec, build_ffnn(spec), {}, Scaling::identity(spec.input_width),
              Scaling::identity(spec.output_width)};
  Rng rng(hash_seed(seed, {0xFF1, spec.input_width, spec.output_width}));
  m.params = nn::init_parameters(m.network, rng);
  return m;
}

inline std::vector<double> predict(const FfnnModel& m, std::span<const double> x) {
  if (x.size() != m.spec.input_width)
    throw ShapeError(-1, "FFNN expects " + std::to_string(m.spec.input_width) + " inputs, got " +
                             std::to_string(x.size()));
  Tensor in({x.size()}, m.input_scaling.apply(x));
  Tensor out = nn::forward(m.network, m.params, in);
  return m.output_scaling.invert(out.values());
}

}  // namespace wavestate
