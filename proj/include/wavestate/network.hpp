#pragma once

#include <Eigen/Core>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "wavestate/errors.hpp"
#include "wavestate/layers.hpp"
#include "wavestate/rng.hpp"
#include "wavestate/tensor.hpp"

namespace wavestate::nn {

struct Network {
  Shape input_shape;
  std::vector<LayerSpec> layers;

  // Output shape of every layer, in order. Throws ShapeError naming the
  // first layer whose input cannot be consumed.
  std::vector<Shape> output_shapes() const {
    std::vector<Shape> shapes;
    shapes.reserve(layers.size());
    Shape current = input_shape;
    for (std::size_t i = 0; i < layers.size(); ++i) {
      current = infer_output_shape(layers[i], current, static_cast<std::ptrdiff_t>(i));
      shapes.push_back(current);
    }
    return shapes;
  }

  Shape output_shape() const {
    auto shapes = output_shapes();
    return shapes.empty() ? input_shape : shapes.back();
  }

  // Input shape seen by each layer.
  std::vector<Shape> input_shapes() const {
    std::vector<Shape> shapes;
    shapes.reserve(layers.size());
    Shape current = input_shape;
    for (std::size_t i = 0; i < layers.size(); ++i) {
      shapes.push_back(current);
      current = infer_output_shape(layers[i], current, static_cast<std::ptrdiff_t>(i));
    }
    return shapes;
  }

  // Exact weight + bias element count of each layer.
  std::vector<std::size_t> layer_parameter_counts() const {
    const auto ins = input_shapes();
    std::vector<std::size_t> counts;
    counts.reserve(layers.size());
    for (std::size_t i = 0; i < layers.size(); ++i) {
      if (!layers[i].has_parameters()) {
        counts.push_back(0);
        continue;
      }
      auto [w, b] = parameter_shapes(layers[i], ins[i], static_cast<std::ptrdiff_t>(i));
      counts.push_back(shape_size(w) + shape_size(b));
    }
    return counts;
  }

  std::size_t parameter_count() const {
    std::size_t total = 0;
    for (auto c : layer_parameter_counts()) total += c;
    return total;
  }

  friend bool operator==(const Network&, const Network&) = default;
};

inline std::size_t count_parameters(const Network& net) { return net.parameter_count(); }

inline ParameterSet zero_parameters(const Network& net) {
  const auto ins = net.input_shapes();
  ParameterSet params(net.layers.size());
  for (std::size_t i = 0; i < net.layers.size(); ++i) {
    if (!net.layers[i].has_parameters()) continue;
    auto [w, b] = parameter_shapes(net.layers[i], ins[i], static_cast<std::ptrdiff_t>(i));
    params[i] = {Tensor(w), Tensor(b)};
  }
  return params;
}

// Uniform fan-in initialisation, U(-sqrt(3/fan_in), sqrt(3/fan_in)), zero biases.
inline ParameterSet init_parameters(const Network& net, Rng& rng) {
  ParameterSet params = zero_parameters(net);
  for (auto& p : params) {
    if (p.weight.empty()) continue;
    const auto& ws = p.weight.shape();
    const std::size_t fan_in = p.weight.size() / ws.back();
    const double limit = std::sqrt(3.0 / static_cast<double>(fan_in));
    for (auto& v : p.weight.values()) v = rng.uniform(-limit, limit);
  }
  return params;
}

inline void check_parameters(const Network& net, const ParameterSet& params) {
  if (params.size() != net.layers.size())
    throw ShapeError(-1, "parameter set has " + std::to_string(params.size()) + " layers, network has " +
                             std::to_string(net.layers.size()));
  const auto ins = net.input_shapes();
  for (std::size_t i = 0; i < net.layers.size(); ++i) {
    if (!net.layers[i].has_parameters()) continue;
    auto [w, b] = parameter_shapes(net.layers[i], ins[i], static_cast<std::ptrdiff_t>(i));
    if (params[i].weight.shape() != w || params[i].bias.shape() != b)
      throw ShapeError(static_cast<std::ptrdiff_t>(i), "parameter shapes do not match layer spec");
  }
}

// Intermediates retained by forward() for a subsequent backward().
struct ForwardCache {
  std::vector<Tensor> inputs;  // input of each layer
  Tensor output;
  std::vector<std::vector<std::uint32_t>> argmax;  // pooling layers only
  bool valid = false;
};

struct Gradients {
  ParameterSet params;
  Tensor input;
};

namespace detail {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapMat = Eigen::Map<RowMat>;
using CMapMat = Eigen::Map<const RowMat>;
using CMapRow = Eigen::Map<const Eigen::RowVectorXd>;
using MapRow = Eigen::Map<Eigen::RowVectorXd>;

inline AlignedVector& scratch(std::size_t slot, std::size_t n) {
  thread_local AlignedVector buffers[3];
  auto& b = buffers[slot];
  if (b.size() < n) b.resize(n);
  return b;
}

// Kernel taps that reach at least one in-bounds input under same padding.
// On a 1x1 grid only the centre tap survives, which keeps path-grid
// convolutions over collapsed axes from doing nine times the work.
struct ConvPlan {
  Grid grid;
  std::size_t kh = 1, kw = 1, ph = 0, pw = 0;
  std::vector<std::array<std::size_t, 2>> taps;
  bool all_taps = true;

  std::size_t patch_width() const { return taps.size() * grid.channels; }
  std::size_t rows() const { return grid.batch * grid.height * grid.width; }
};

inline ConvPlan plan_conv(const LayerSpec& s, const Shape& in_shape, std::ptrdiff_t layer) {
  ConvPlan p;
  p.grid = grid_of(s.kind, in_shape, layer);
  p.kh = s.kernel[0];
  p.kw = s.kernel[1];
  p.ph = (p.kh - 1) / 2;
  p.pw = (p.kw - 1) / 2;
  auto reaches = [](std::size_t tap, std::size_t pad, std::size_t extent) {
    const auto d = static_cast<std::ptrdiff_t>(tap) - static_cast<std::ptrdiff_t>(pad);
    return (d < 0 ? -d : d) < static_cast<std::ptrdiff_t>(extent);
  };
  for (std::size_t i = 0; i < p.kh; ++i)
    for (std::size_t j = 0; j < p.kw; ++j)
      if (reaches(i, p.ph, p.grid.height) && reaches(j, p.pw, p.grid.width)) p.taps.push_back({i, j});
  p.all_taps = p.taps.size() == p.kh * p.kw;
  return p;
}

// Patch rows [r0, r1) of a same-padded convolution; columns ordered
// (active tap, input channel).
inline void im2col(const ConvPlan& p, const double* in, std::size_t r0, std::size_t r1, double* cols) {
  const Grid& g = p.grid;
  const std::size_t C = g.channels, width = p.patch_width();
  const auto H = static_cast<std::ptrdiff_t>(g.height), W = static_cast<std::ptrdiff_t>(g.width);
  for (std::size_t r = r0; r < r1; ++r) {
    const std::size_t b = r / (g.height * g.width);
    const auto y = static_cast<std::ptrdiff_t>((r / g.width) % g.height);
    const auto x = static_cast<std::ptrdiff_t>(r % g.width);
    double* row = cols + (r - r0) * width;
    for (std::size_t t = 0; t < p.taps.size(); ++t) {
      const std::ptrdiff_t yy = y + static_cast<std::ptrdiff_t>(p.taps[t][0]) - static_cast<std::ptrdiff_t>(p.ph);
      const std::ptrdiff_t xx = x + static_cast<std::ptrdiff_t>(p.taps[t][1]) - static_cast<std::ptrdiff_t>(p.pw);
      double* dst = row + t * C;
      if (yy < 0 || yy >= H || xx < 0 || xx >= W) {
        std::fill(dst, dst + C, 0.0);
      } else {
        const double* src = in + ((b * g.height + static_cast<std::size_t>(yy)) * g.width + static_cast<std::size_t>(xx)) * C;
        std::copy(src, src + C, dst);
      }
    }
  }
}

inline void col2im_add(const ConvPlan& p, const double* cols, std::size_t r0, std::size_t r1, double* in) {
  const Grid& g = p.grid;
  const std::size_t C = g.channels, width = p.patch_width();
  const auto H = static_cast<std::ptrdiff_t>(g.height), W = static_cast<std::ptrdiff_t>(g.width);
  for (std::size_t r = r0; r < r1; ++r) {
    const std::size_t b = r / (g.height * g.width);
    const auto y = static_cast<std::ptrdiff_t>((r / g.width) % g.height);
    const auto x = static_cast<std::ptrdiff_t>(r % g.width);
    const double* row = cols + (r - r0) * width;
    for (std::size_t t = 0; t < p.taps.size(); ++t) {
      const std::ptrdiff_t yy = y + static_cast<std::ptrdiff_t>(p.taps[t][0]) - static_cast<std::ptrdiff_t>(p.ph);
      const std::ptrdiff_t xx = x + static_cast<std::ptrdiff_t>(p.taps[t][1]) - static_cast<std::ptrdiff_t>(p.pw);
      if (yy < 0 || yy >= H || xx < 0 || xx >= W) continue;
      const double* src = row + t * C;
      double* dst = in + ((b * g.height + static_cast<std::size_t>(yy)) * g.width + static_cast<std::size_t>(xx)) * C;
      for (std::size_t c = 0; c < C; ++c) dst[c] += src[c];
    }
  }
}

// Weight rows of the active taps, (active taps * Cin) x Cout.
inline RowMat active_weights(const ConvPlan& p, const Tensor& weight, std::size_t filters) {
  const std::size_t C = p.grid.channels;
  RowMat w(static_cast<Eigen::Index>(p.patch_width()), static_cast<Eigen::Index>(filters));
  for (std::size_t t = 0; t < p.taps.size(); ++t) {
    const double* src = weight.data() + (p.taps[t][0] * p.kw + p.taps[t][1]) * C * filters;
    std::copy(src, src + C * filters, w.data() + t * C * filters);
  }
  return w;
}

// Rows per im2col block; keeps the patch buffer cache-resident.
inline std::size_t conv_block_rows(std::size_t patch_width) {
  return std::max<std::size_t>(32, (std::size_t{1} << 17) / std::max<std::size_t>(patch_width, 1));
}

inline Tensor conv_forward(const LayerSpec& s, const LayerParams& p, const Tensor& in, const Shape& out_shape,
                           std::ptrdiff_t layer) {
  const ConvPlan plan = plan_conv(s, in.shape(), layer);
  const std::size_t rows = plan.rows(), k = plan.patch_width();
  const auto f = static_cast<Eigen::Index>(s.filters);
  Tensor out(out_shape);
  RowMat compact;
  if (!plan.all_taps) compact = active_weights(plan, p.weight, s.filters);
  CMapMat w(plan.all_taps ? p.weight.data() : compact.data(), static_cast<Eigen::Index>(k), f);
  const CMapRow bias(p.bias.data(), f);
  if (plan.taps.size() == 1 && plan.ph == plan.taps[0][0] && plan.pw == plan.taps[0][1]) {
    // Centre tap only: the input already is the patch matrix.
    MapMat y(out.data(), static_cast<Eigen::Index>(rows), f);
    y.noalias() = CMapMat(in.data(), static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(k)) * w;
    y.rowwise() += bias;
    return out;
  }
  const std::size_t block = conv_block_rows(k);
  auto& buf = scratch(0, block * k);
  for (std::size_t r0 = 0; r0 < rows; r0 += block) {
    const std::size_t r1 = std::min(rows, r0 + block);
    const auto n = static_cast<Eigen::Index>(r1 - r0);
    im2col(plan, in.data(), r0, r1, buf.data());
    MapMat y(out.data() + r0 * s.filters, n, f);
    y.noalias() = CMapMat(buf.data(), n, static_cast<Eigen::Index>(k)) * w;
    y.rowwise() += bias;
  }
  return out;
}

inline Tensor conv_backward(const LayerSpec& s, const LayerParams& p, const Tensor& in, const Tensor& grad_out,
                            LayerParams& grad_p, std::ptrdiff_t layer) {
  const ConvPlan plan = plan_conv(s, in.shape(), layer);
  const std::size_t rows = plan.rows(), k = plan.patch_width();
  const auto f = static_cast<Eigen::Index>(s.filters);
  const auto ke = static_cast<Eigen::Index>(k);
  RowMat compact;
  if (!plan.all_taps) compact = active_weights(plan, p.weight, s.filters);
  CMapMat w(plan.all_taps ? p.weight.data() : compact.data(), ke, f);
  RowMat dw_compact;
  if (!plan.all_taps) dw_compact = RowMat::Zero(ke, f);
  MapMat dw(plan.all_taps ? grad_p.weight.data() : dw_compact.data(), ke, f);
  MapRow(grad_p.bias.data(), f) =
      CMapMat(grad_out.data(), static_cast<Eigen::Index>(rows), f).colwise().sum();
  Tensor grad_in(in.shape());

  if (plan.taps.size() == 1 && plan.ph == plan.taps[0][0] && plan.pw == plan.taps[0][1]) {
    const auto n = static_cast<Eigen::Index>(rows);
    CMapMat dy(grad_out.data(), n, f);
    dw.noalias() = CMapMat(in.data(), n, ke).transpose() * dy;
    MapMat(grad_in.data(), n, ke).noalias() = dy * w.transpose();
  } else {
    const std::size_t block = conv_block_rows(k);
    auto& cols = scratch(0, block * k);
    auto& dcols = scratch(1, block * k);
    dw.setZero();
    for (std::size_t r0 = 0; r0 < rows; r0 += block) {
      const std::size_t r1 = std::min(rows, r0 + block);
      const auto n = static_cast<Eigen::Index>(r1 - r0);
      CMapMat dy(grad_out.data() + r0 * s.filters, n, f);
      im2col(plan, in.data(), r0, r1, cols.data());
      dw.noalias() += CMapMat(cols.data(), n, ke).transpose() * dy;
      MapMat(dcols.data(), n, ke).noalias() = dy * w.transpose();
      col2im_add(plan, dcols.data(), r0, r1, grad_in.data());
    }
  }
  if (!plan.all_taps) {
    const std::size_t C = plan.grid.channels;
    for (std::size_t t = 0; t < plan.taps.size(); ++t) {
      const double* src = dw_compact.data() + t * C * s.filters;
      double* dst = grad_p.weight.data() + (plan.taps[t][0] * plan.kw + plan.taps[t][1]) * C * s.filters;
      std::copy(src, src + C * s.filters, dst);
    }
  }
  return grad_in;
}

inline Tensor dense_forward(const LayerSpec& s, const LayerParams& p, const Tensor& in, const Shape& out_shape) {
  const auto in_w = static_cast<Eigen::Index>(in.shape().back());
  const auto rows = static_cast<Eigen::Index>(in.size()) / in_w;
  const auto units = static_cast<Eigen::Index>(s.units);
  Tensor out(out_shape);
  MapMat y(out.data(), rows, units);
  y.noalias() = CMapMat(in.data(), rows, in_w) * CMapMat(p.weight.data(), in_w, units);
  y.rowwise() += CMapRow(p.bias.data(), units);
  return out;
}

inline Tensor dense_backward(const LayerSpec& s, const LayerParams& p, const Tensor& in, const Tensor& grad_out,
                             LayerParams& grad_p) {
  const auto in_w = static_cast<Eigen::Index>(in.shape().back());
  const auto rows = static_cast<Eigen::Index>(in.size()) / in_w;
  const auto units = static_cast<Eigen::Index>(s.units);
  CMapMat dy(grad_out.data(), rows, units);
  MapMat(grad_p.weight.data(), in_w, units).noalias() = CMapMat(in.data(), rows, in_w).transpose() * dy;
  MapRow(grad_p.bias.data(), units) = dy.colwise().sum();
  Tensor grad_in(in.shape());
  MapMat(grad_in.data(), rows, in_w).noalias() = dy * CMapMat(p.weight.data(), in_w, units).transpose();
  return grad_in;
}

inline Tensor pool_forward(const LayerSpec& s, const Tensor& in, const Shape& out_shape, std::vector<std::uint32_t>& argmax,
                           std::ptrdiff_t layer) {
  const Grid g = grid_of(s.kind, in.shape(), layer);
  const std::size_t fh = s.factor[0], fw = s.factor[1];
  const std::size_t oh = g.height / fh, ow = g.width / fw, C = g.channels;
  Tensor out(out_shape);
  argmax.assign(out.size(), 0);
  for (std::size_t b = 0; b < g.batch; ++b)
    for (std::size_t y = 0; y < oh; ++y)
      for (std::size_t x = 0; x < ow; ++x)
        for (std::size_t c = 0; c < C; ++c) {
          std::size_t best = ((b * g.height + y * fh) * g.width + x * fw) * C + c;
          for (std::size_t i = 0; i < fh; ++i)
            for (std::size_t j = 0; j < fw; ++j) {
              const std::size_t idx = ((b * g.height + y * fh + i) * g.width + x * fw + j) * C + c;
              if (in[idx] > in[best]) best = idx;
            }
          const std::size_t o = ((b * oh + y) * ow + x) * C + c;
          out[o] = in[best];
          argmax[o] = static_cast<std::uint32_t>(best);
        }
  return out;
}

inline Tensor upsample_forward(const LayerSpec& s, const Tensor& in, const Shape& out_shape, std::ptrdiff_t layer) {
  const Grid g = grid_of(s.kind, in.shape(), layer);
  const std::size_t fh = s.factor[0], fw = s.factor[1];
  const std::size_t oh = g.height * fh, ow = g.width * fw, C = g.channels;
  Tensor out(out_shape);
  for (std::size_t b = 0; b < g.batch; ++b)
    for (std::size_t y = 0; y < oh; ++y)
      for (std::size_t x = 0; x < ow; ++x) {
        const double* src = in.data() + ((b * g.height + y / fh) * g.width + x / fw) * C;
        std::copy(src, src + C, out.data() + ((b * oh + y) * ow + x) * C);
      }
  return out;
}

inline Tensor upsample_backward(const LayerSpec& s, const Tensor& in, const Tensor& grad_out, std::ptrdiff_t layer) {
  const Grid g = grid_of(s.kind, in.shape(), layer);
  const std::size_t fh = s.factor[0], fw = s.factor[1];
  const std::size_t oh = g.height * fh, ow = g.width * fw, C = g.channels;
  Tensor grad_in(in.shape());
  for (std::size_t b = 0; b < g.batch; ++b)
    for (std::size_t y = 0; y < oh; ++y)
      for (std::size_t x = 0; x < ow; ++x) {
        const double* src = grad_out.data() + ((b * oh + y) * ow + x) * C;
        double* dst = grad_in.data() + ((b * g.height + y / fh) * g.width + x / fw) * C;
        for (std::size_t c = 0; c < C; ++c) dst[c] += src[c];
      }
  return grad_in;
}

// tanh(x) = 1 - 2 / (exp(2x) + 1) through Eigen's packet exp; std::tanh
// is scalar and dominates the step time on wide activations. Absolute
// error stays within a few ulp of 1.
inline void tanh_inplace(Tensor& t) {
  Eigen::Map<Eigen::ArrayXd> a(t.data(), static_cast<Eigen::Index>(t.size()));
  a = 1.0 - 2.0 / ((2.0 * a.max(-20.0).min(20.0)).exp() + 1.0);
}

}  // namespace detail

// Runs the network on one example. Pass a cache to enable backward().
inline Tensor forward(const Network& net, const ParameterSet& params, const Tensor& input,
                      ForwardCache* cache = nullptr) {
  if (input.shape() != net.input_shape)
    throw ShapeError(-1, "expected " + shape_string(net.input_shape) + ", got " + shape_string(input.shape()));
  if (params.size() != net.layers.size())
    throw ShapeError(-1, "parameter set does not match network depth");
  if (cache) {
    cache->inputs.clear();
    cache->inputs.reserve(net.layers.size());
    cache->argmax.assign(net.layers.size(), {});
    cache->valid = false;
  }
  Tensor x = input;
  std::vector<std::uint32_t> argmax;
  for (std::size_t i = 0; i < net.layers.size(); ++i) {
    const auto& s = net.layers[i];
    const auto li = static_cast<std::ptrdiff_t>(i);
    const Shape out_shape = infer_output_shape(s, x.shape(), li);
    Tensor y;
    switch (s.kind) {
      case LayerKind::Conv1D:
      case LayerKind::Conv2D: {
        auto [ws, bs] = parameter_shapes(s, x.shape(), li);
        if (params[i].weight.shape() != ws || params[i].bias.shape() != bs)
          throw ShapeError(li, "parameter shapes do not match layer spec");
        y = detail::conv_forward(s, params[i], x, out_shape, li);
        break;
      }
      case LayerKind::Dense: {
        auto [ws, bs] = parameter_shapes(s, x.shape(), li);
        if (params[i].weight.shape() != ws || params[i].bias.shape() != bs)
          throw ShapeError(li, "parameter shapes do not match layer spec");
        y = detail::dense_forward(s, params[i], x, out_shape);
        break;
      }
      case LayerKind::MaxPool1D:
      case LayerKind::MaxPool2D:
        y = detail::pool_forward(s, x, out_shape, argmax, li);
        if (cache) cache->argmax[i] = std::move(argmax);
        break;
      case LayerKind::Upsample1D:
      case LayerKind::Upsample2D:
        y = detail::upsample_forward(s, x, out_shape, li);
        break;
      case LayerKind::Flatten:
      case LayerKind::Reshape:
        y = x.reshaped(out_shape);
        break;
      case LayerKind::Activation:
        y = x;
        if (s.activation == Activation::Tanh) detail::tanh_inplace(y);
        break;
    }
    if (!y.all_finite()) throw NonFiniteError("non-finite value in output of layer " + std::to_string(i));
    if (cache) cache->inputs.push_back(std::move(x));
    x = std::move(y);
  }
  if (cache) {
    cache->output = x;
    cache->valid = true;
  }
  return x;
}

// Reverse pass for the example held in `cache`. Parameter gradients are
// written (not accumulated) into a fresh ParameterSet.
inline Gradients backward(const Network& net, const ParameterSet& params, const ForwardCache& cache,
                          const Tensor& grad_output) {
  if (!cache.valid || cache.inputs.size() != net.layers.size())
    throw MissingCacheError("backward() called without a matching forward cache");
  if (grad_output.shape() != cache.output.shape())
    throw ShapeError(static_cast<std::ptrdiff_t>(net.layers.size()) - 1,
                     "output gradient " + shape_string(grad_output.shape()) + " vs output " +
                         shape_string(cache.output.shape()));
  Gradients grads{zero_parameters(net), {}};
  Tensor g = grad_output;
  for (std::size_t n = net.layers.size(); n-- > 0;) {
    const auto& s = net.layers[n];
    const auto li = static_cast<std::ptrdiff_t>(n);
    const Tensor& in = cache.inputs[n];
    switch (s.kind) {
      case LayerKind::Conv1D:
      case LayerKind::Conv2D:
        g = detail::conv_backward(s, params[n], in, g, grads.params[n], li);
        break;
      case LayerKind::Dense:
        g = detail::dense_backward(s, params[n], in, g, grads.params[n]);
        break;
      case LayerKind::MaxPool1D:
      case LayerKind::MaxPool2D: {
        Tensor gi(in.shape());
        const auto& am = cache.argmax[n];
        for (std::size_t o = 0; o < am.size(); ++o) gi[am[o]] += g[o];
        g = std::move(gi);
        break;
      }
      case LayerKind::Upsample1D:
      case LayerKind::Upsample2D:
        g = detail::upsample_backward(s, in, g, li);
        break;
      case LayerKind::Flatten:
      case LayerKind::Reshape:
        g.reshape(in.shape());
        break;
      case LayerKind::Activation:
        if (s.activation == Activation::Tanh) {
          // d tanh(x) = 1 - tanh(x)^2, with tanh(x) being this layer's output.
          const Tensor& out = n + 1 < net.layers.size() ? cache.inputs[n + 1] : cache.output;
          for (std::size_t i = 0; i < g.size(); ++i) g[i] *= 1.0 - out[i] * out[i];
        }
        break;
    }
  }
  grads.input = std::move(g);
  return grads;
}

}  // namespace wavestate::nn
