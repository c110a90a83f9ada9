#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "wavestate/errors.hpp"
#include "wavestate/rng.hpp"
#include "wavestate/tensor.hpp"

namespace wavestate::nn {

enum class LayerKind : std::uint8_t {
  Conv1D,
  Conv2D,
  MaxPool1D,
  MaxPool2D,
  Upsample1D,
  Upsample2D,
  Dense,
  Flatten,
  Reshape,
  Activation,
};

enum class Activation : std::uint8_t { Identity, Tanh };

inline std::string_view to_string(LayerKind kind) {
  switch (kind) {
    case LayerKind::Conv1D: return "Conv1D";
    case LayerKind::Conv2D: return "Conv2D";
    case LayerKind::MaxPool1D: return "MaxPool1D";
    case LayerKind::MaxPool2D: return "MaxPool2D";
    case LayerKind::Upsample1D: return "Upsample1D";
    case LayerKind::Upsample2D: return "Upsample2D";
    case LayerKind::Dense: return "Dense";
    case LayerKind::Flatten: return "Flatten";
    case LayerKind::Reshape: return "Reshape";
    case LayerKind::Activation: return "Activation";
  }
  return "?";
}

inline LayerKind layer_kind_from_string(std::string_view name) {
  for (auto k : {LayerKind::Conv1D, LayerKind::Conv2D, LayerKind::MaxPool1D, LayerKind::MaxPool2D,
                 LayerKind::Upsample1D, LayerKind::Upsample2D, LayerKind::Dense, LayerKind::Flatten,
                 LayerKind::Reshape, LayerKind::Activation})
    if (to_string(k) == name) return k;
  throw InvalidArgument("unknown layer kind '" + std::string(name) + "'");
}

inline std::string_view to_string(Activation a) { return a == Activation::Tanh ? "tanh" : "identity"; }

inline Activation activation_from_string(std::string_view name) {
  if (name == "tanh") return Activation::Tanh;
  if (name == "identity") return Activation::Identity;
  throw InvalidArgument("unknown activation '" + std::string(name) + "'");
}

// One row of a layer table. Only the fields relevant to `kind` are read.
struct LayerSpec {
  LayerKind kind = LayerKind::Flatten;
  std::size_t filters = 0;
  std::array<std::size_t, 2> kernel{1, 1};
  std::array<std::size_t, 2> factor{1, 1};
  std::size_t units = 0;
  Activation activation = Activation::Identity;
  Shape target{};

  static LayerSpec conv1d(std::size_t filters, std::size_t kernel = 3) {
    return {.kind = LayerKind::Conv1D, .filters = filters, .kernel = {kernel, 1}};
  }
  static LayerSpec conv2d(std::size_t filters, std::size_t kh = 3, std::size_t kw = 3) {
    return {.kind = LayerKind::Conv2D, .filters = filters, .kernel = {kh, kw}};
  }
  static LayerSpec max_pool1d(std::size_t f) { return {.kind = LayerKind::MaxPool1D, .factor = {f, 1}}; }
  static LayerSpec max_pool2d(std::size_t fh, std::size_t fw) {
    return {.kind = LayerKind::MaxPool2D, .factor = {fh, fw}};
  }
  static LayerSpec upsample1d(std::size_t f) { return {.kind = LayerKind::Upsample1D, .factor = {f, 1}}; }
  static LayerSpec upsample2d(std::size_t fh, std::size_t fw) {
    return {.kind = LayerKind::Upsample2D, .factor = {fh, fw}};
  }
  static LayerSpec dense(std::size_t units) { return {.kind = LayerKind::Dense, .units = units}; }
  static LayerSpec flatten() { return {.kind = LayerKind::Flatten}; }
  static LayerSpec reshape(Shape target) { return {.kind = LayerKind::Reshape, .target = std::move(target)}; }
  static LayerSpec act(Activation a) { return {.kind = LayerKind::Activation, .activation = a}; }

  bool has_parameters() const noexcept {
    return kind == LayerKind::Conv1D || kind == LayerKind::Conv2D || kind == LayerKind::Dense;
  }

  friend bool operator==(const LayerSpec&, const LayerSpec&) = default;
};

struct LayerParams {
  Tensor weight;
  Tensor bias;
  friend bool operator==(const LayerParams&, const LayerParams&) = default;
};

// Indexed by layer position; parameter-free layers hold empty tensors.
using ParameterSet = std::vector<LayerParams>;

namespace detail {

// Spatial view used by all convolution, pooling and upsampling kernels:
// (batch, height, width, channels), channels innermost. 1D layers use
// width 1; any leading axes beyond the spatial ones fold into batch.
struct Grid {
  std::size_t batch = 1, height = 1, width = 1, channels = 1;
};

inline bool is_2d(LayerKind k) {
  return k == LayerKind::Conv2D || k == LayerKind::MaxPool2D || k == LayerKind::Upsample2D;
}

inline Grid grid_of(LayerKind kind, const Shape& shape, std::ptrdiff_t layer) {
  const std::size_t spatial = is_2d(kind) ? 2 : 1;
  if (shape.size() < spatial + 1)
    throw ShapeError(layer, std::string(to_string(kind)) + " needs rank >= " + std::to_string(spatial + 1) +
                                ", got " + shape_string(shape));
  Grid g;
  const std::size_t r = shape.size();
  g.channels = shape[r - 1];
  if (spatial == 2) {
    g.height = shape[r - 3];
    g.width = shape[r - 2];
  } else {
    g.height = shape[r - 2];
  }
  for (std::size_t i = 0; i + spatial + 1 < r; ++i) g.batch *= shape[i];
  return g;
}

inline void validate_spec(const LayerSpec& s, std::ptrdiff_t layer) {
  switch (s.kind) {
    case LayerKind::Conv1D:
    case LayerKind::Conv2D:
      if (s.filters < 1) throw ShapeError(layer, "convolution needs at least one filter");
      if (s.kernel[0] < 1 || s.kernel[1] < 1) throw ShapeError(layer, "kernel extents must be >= 1");
      break;
    case LayerKind::MaxPool1D:
    case LayerKind::MaxPool2D:
    case LayerKind::Upsample1D:
    case LayerKind::Upsample2D:
      if (s.factor[0] < 1 || s.factor[1] < 1) throw ShapeError(layer, "pool/upsample factors must be >= 1");
      break;
    case LayerKind::Dense:
      if (s.units < 1) throw ShapeError(layer, "dense output width must be >= 1");
      break;
    default: break;
  }
}

}  // namespace detail

inline Shape infer_output_shape(const LayerSpec& s, const Shape& in, std::ptrdiff_t layer = 0) {
  detail::validate_spec(s, layer);
  Shape out = in;
  switch (s.kind) {
    case LayerKind::Conv1D:
    case LayerKind::Conv2D:
      detail::grid_of(s.kind, in, layer);
      out.back() = s.filters;
      return out;
    case LayerKind::MaxPool1D:
    case LayerKind::MaxPool2D: {
      const auto g = detail::grid_of(s.kind, in, layer);
      if (g.height % s.factor[0] || g.width % s.factor[1])
        throw ShapeError(layer, "pool factors do not divide " + shape_string(in));
      const std::size_t r = in.size();
      if (s.kind == LayerKind::MaxPool2D) {
        out[r - 3] /= s.factor[0];
        out[r - 2] /= s.factor[1];
      } else {
        out[r - 2] /= s.factor[0];
      }
      return out;
    }
    case LayerKind::Upsample1D:
    case LayerKind::Upsample2D: {
      detail::grid_of(s.kind, in, layer);
      const std::size_t r = in.size();
      if (s.kind == LayerKind::Upsample2D) {
        out[r - 3] *= s.factor[0];
        out[r - 2] *= s.factor[1];
      } else {
        out[r - 2] *= s.factor[0];
      }
      return out;
    }
    case LayerKind::Dense:
      if (in.empty()) throw ShapeError(layer, "dense layer needs rank >= 1");
      out.back() = s.units;
      return out;
    case LayerKind::Flatten:
      return {shape_size(in)};
    case LayerKind::Reshape:
      if (shape_size(s.target) != shape_size(in))
        throw ShapeError(layer, "cannot reshape " + shape_string(in) + " to " + shape_string(s.target));
      return s.target;
    case LayerKind::Activation:
      return out;
  }
  return out;
}

// Weight and bias shapes for a parametrised layer given its input shape.
inline std::pair<Shape, Shape> parameter_shapes(const LayerSpec& s, const Shape& in, std::ptrdiff_t layer = 0) {
  switch (s.kind) {
    case LayerKind::Conv1D: {
      const auto g = detail::grid_of(s.kind, in, layer);
      return {{s.kernel[0], g.channels, s.filters}, {s.filters}};
    }
    case LayerKind::Conv2D: {
      const auto g = detail::grid_of(s.kind, in, layer);
      return {{s.kernel[0], s.kernel[1], g.channels, s.filters}, {s.filters}};
    }
    case LayerKind::Dense:
      if (in.empty()) throw ShapeError(layer, "dense layer needs rank >= 1");
      return {{in.back(), s.units}, {s.units}};
    default:
      return {{}, {}};
  }
}

}  // namespace wavestate::nn
