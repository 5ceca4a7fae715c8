#include "rcnds/ops/layers.hpp"

#include <algorithm>
#include <string>

#include "rcnds/kernels/kernels.hpp"

namespace rcnds::ops {
namespace {

// Upper bound on im2col buffer elements; the batch is processed in chunks.
constexpr std::size_t kMaxColumnElements = std::size_t{1} << 24;

void require_rank4(const Shape& s, const char* what) {
  if (s.rank() != 4) throw ShapeError(std::string(what) + ": expected a 4-D tensor, got " + s.str());
}

struct ConvGeometry {
  int channels, height, width;
  int kh, kw, stride, pad;
  int out_h, out_w;

  int patch() const { return channels * kh * kw; }
  int pixels() const { return out_h * out_w; }
};

template <typename T>
ConvGeometry conv_geometry(const Shape& in, const Tensor<T>& weights, std::size_t bias_size, ConvConfig cfg) {
  require_rank4(in, "conv2d");
  if (weights.rank() != 4) throw ShapeError("conv2d: weights must be (out, in, kh, kw)");
  if (cfg.stride < 1 || cfg.pad < 0) throw ShapeError("conv2d: stride must be >= 1 and pad >= 0");
  if (in[1] != weights.dim(1)) {
    throw ShapeError("conv2d: input has " + std::to_string(in[1]) + " channels, weights expect " +
                     std::to_string(weights.dim(1)));
  }
  if (bias_size != static_cast<std::size_t>(weights.dim(0))) {
    throw ShapeError("conv2d: bias length does not match output channels");
  }
  ConvGeometry g{in[1], in[2], in[3], weights.dim(2), weights.dim(3), cfg.stride, cfg.pad, 0, 0};
  g.out_h = conv_out_dim(g.height, g.kh, g.stride, g.pad);
  g.out_w = conv_out_dim(g.width, g.kw, g.stride, g.pad);
  return g;
}

int images_per_chunk(const ConvGeometry& g, int batch) {
  const std::size_t per_image = static_cast<std::size_t>(g.patch()) * g.pixels();
  return static_cast<int>(std::clamp<std::size_t>(kMaxColumnElements / std::max<std::size_t>(per_image, 1), 1,
                                                  static_cast<std::size_t>(batch)));
}

// Column matrix (patch x images*pixels) for images [first, first + count).
template <typename T>
void im2col(const Tensor<T>& input, const ConvGeometry& g, int first, int count, std::vector<T>& col) {
  const int pixels = g.pixels();
  const std::size_t cols = static_cast<std::size_t>(count) * pixels;
  col.assign(static_cast<std::size_t>(g.patch()) * cols, T(0));
  for (int c = 0; c < g.channels; ++c) {
    for (int i = 0; i < g.kh; ++i) {
      for (int j = 0; j < g.kw; ++j) {
        T* row = col.data() + ((static_cast<std::size_t>(c) * g.kh + i) * g.kw + j) * cols;
        for (int n = 0; n < count; ++n) {
          const T* plane = input.data() + input.index(first + n, c, 0, 0);
          T* dst = row + static_cast<std::size_t>(n) * pixels;
          for (int y = 0; y < g.out_h; ++y) {
            const int iy = y * g.stride - g.pad + i;
            if (iy < 0 || iy >= g.height) continue;
            for (int x = 0; x < g.out_w; ++x) {
              const int ix = x * g.stride - g.pad + j;
              if (ix >= 0 && ix < g.width) dst[y * g.out_w + x] = plane[iy * g.width + ix];
            }
          }
        }
      }
    }
  }
}

template <typename T>
void col2im_add(const std::vector<T>& col, const ConvGeometry& g, int first, int count, Tensor<T>& grad) {
  const int pixels = g.pixels();
  const std::size_t cols = static_cast<std::size_t>(count) * pixels;
  for (int c = 0; c < g.channels; ++c) {
    for (int i = 0; i < g.kh; ++i) {
      for (int j = 0; j < g.kw; ++j) {
        const T* row = col.data() + ((static_cast<std::size_t>(c) * g.kh + i) * g.kw + j) * cols;
        for (int n = 0; n < count; ++n) {
          T* plane = grad.data() + grad.index(first + n, c, 0, 0);
          const T* src = row + static_cast<std::size_t>(n) * pixels;
          for (int y = 0; y < g.out_h; ++y) {
            const int iy = y * g.stride - g.pad + i;
            if (iy < 0 || iy >= g.height) continue;
            for (int x = 0; x < g.out_w; ++x) {
              const int ix = x * g.stride - g.pad + j;
              if (ix >= 0 && ix < g.width) plane[iy * g.width + ix] += src[y * g.out_w + x];
            }
          }
        }
      }
    }
  }
}

void require_pool_fits(const Shape& in, int kernel, int stride, const char* what) {
  require_rank4(in, what);
  if (kernel < 1 || stride < 1) throw ShapeError(std::string(what) + ": kernel and stride must be >= 1");
  if (kernel > in[2] || kernel > in[3]) {
    throw ShapeError(std::string(what) + ": window " + std::to_string(kernel) + " larger than input " +
                     std::to_string(in[2]) + "x" + std::to_string(in[3]));
  }
}

}  // namespace

int conv_out_dim(int in, int kernel, int stride, int pad) {
  const int span = in + 2 * pad - kernel;
  if (span < 0 || stride < 1) {
    throw ShapeError("conv output size is non-positive (in=" + std::to_string(in) + " k=" +
                     std::to_string(kernel) + " pad=" + std::to_string(pad) + ")");
  }
  return span / stride + 1;
}

int pool_out_dim(int in, int kernel, int stride) {
  if (kernel > in || stride < 1 || kernel < 1) {
    throw ShapeError("pool window " + std::to_string(kernel) + " larger than input " + std::to_string(in));
  }
  return (in - kernel) / stride + 1;
}

template <typename T>
Tensor<T> conv2d_forward(const Tensor<T>& input, const Tensor<T>& weights, View<T> bias, ConvConfig cfg) {
  const ConvGeometry g = conv_geometry(input.shape(), weights, bias.size(), cfg);
  const int batch = input.batch();
  const int out_ch = weights.dim(0);
  const int pixels = g.pixels();
  Tensor<T> out(Shape{batch, out_ch, g.out_h, g.out_w});
  const int chunk = images_per_chunk(g, batch);
  std::vector<T> col, product;
  for (int first = 0; first < batch; first += chunk) {
    const int count = std::min(chunk, batch - first);
    im2col(input, g, first, count, col);
    const int cols = count * pixels;
    product.resize(static_cast<std::size_t>(out_ch) * cols);
    kernels::gemm({out_ch, cols, g.patch()}, weights.span(), std::span<const T>(col),
                  std::span<T>(product), false);
    for (int n = 0; n < count; ++n) {
      for (int o = 0; o < out_ch; ++o) {
        const T* src = product.data() + static_cast<std::size_t>(o) * cols + static_cast<std::size_t>(n) * pixels;
        T* dst = out.data() + out.index(first + n, o, 0, 0);
        const T b = bias[static_cast<std::size_t>(o)];
        for (int p = 0; p < pixels; ++p) dst[p] = src[p] + b;
      }
    }
  }
  return out;
}

template <typename T>
ConvGrads<T> conv2d_backward(const Tensor<T>& input, const Tensor<T>& weights, View<T> bias, ConvConfig cfg,
                             const Tensor<T>& grad_out) {
  const ConvGeometry g = conv_geometry(input.shape(), weights, bias.size(), cfg);
  const int batch = input.batch();
  const int out_ch = weights.dim(0);
  const int pixels = g.pixels();
  if (grad_out.shape() != Shape{batch, out_ch, g.out_h, g.out_w}) {
    throw ShapeError("conv2d_backward: grad_out shape " + grad_out.shape().str() + " does not match output");
  }
  ConvGrads<T> grads{Tensor<T>(input.shape()), Tensor<T>(weights.shape()),
                     std::vector<T>(static_cast<std::size_t>(out_ch), T(0))};
  const int chunk = images_per_chunk(g, batch);
  std::vector<T> col, dy, dcol;
  for (int first = 0; first < batch; first += chunk) {
    const int count = std::min(chunk, batch - first);
    const int cols = count * pixels;
    dy.resize(static_cast<std::size_t>(out_ch) * cols);
    for (int n = 0; n < count; ++n) {
      for (int o = 0; o < out_ch; ++o) {
        const T* src = grad_out.data() + grad_out.index(first + n, o, 0, 0);
        std::copy(src, src + pixels, dy.data() + static_cast<std::size_t>(o) * cols + static_cast<std::size_t>(n) * pixels);
        T acc = T(0);
        for (int p = 0; p < pixels; ++p) acc += src[p];
        grads.bias[static_cast<std::size_t>(o)] += acc;
      }
    }
    im2col(input, g, first, count, col);
    kernels::gemm({out_ch, g.patch(), cols, kernels::Trans::kNo, kernels::Trans::kYes}, std::span<const T>(dy),
                  std::span<const T>(col), grads.weights.span(), true);
    dcol.resize(col.size());
    kernels::gemm({g.patch(), cols, out_ch, kernels::Trans::kYes, kernels::Trans::kNo}, weights.span(),
                  std::span<const T>(dy), std::span<T>(dcol), false);
    col2im_add(dcol, g, first, count, grads.input);
  }
  return grads;
}

template <typename T>
MaxPoolResult<T> maxpool_forward(const Tensor<T>& input, int kernel, int stride) {
  const Shape& in = input.shape();
  require_pool_fits(in, kernel, stride, "maxpool");
  const int oh = pool_out_dim(in[2], kernel, stride), ow = pool_out_dim(in[3], kernel, stride);
  MaxPoolResult<T> r{Tensor<T>(Shape{in[0], in[1], oh, ow}), PoolArgmax{in, Shape{in[0], in[1], oh, ow}, {}}};
  r.argmax.index.resize(r.output.size());
  std::size_t out_i = 0;
  for (int n = 0; n < in[0]; ++n) {
    for (int c = 0; c < in[1]; ++c) {
      const std::size_t base = input.index(n, c, 0, 0);
      for (int y = 0; y < oh; ++y) {
        for (int x = 0; x < ow; ++x, ++out_i) {
          std::size_t best = base + static_cast<std::size_t>(y * stride) * in[3] + x * stride;
          for (int i = 0; i < kernel; ++i) {
            for (int j = 0; j < kernel; ++j) {
              const std::size_t idx = base + static_cast<std::size_t>(y * stride + i) * in[3] + x * stride + j;
              if (input[idx] > input[best]) best = idx;
            }
          }
          r.output[out_i] = input[best];
          r.argmax.index[out_i] = best;
        }
      }
    }
  }
  return r;
}

template <typename T>
Tensor<T> maxpool_backward(const PoolArgmax& argmax, const Tensor<T>& grad_out) {
  if (grad_out.shape() != argmax.output_shape || argmax.index.size() != grad_out.size()) {
    throw ShapeError("maxpool_backward: grad_out shape " + grad_out.shape().str() +
                     " does not match recorded output " + argmax.output_shape.str());
  }
  Tensor<T> grad(argmax.input_shape);
  for (std::size_t i = 0; i < grad_out.size(); ++i) grad[argmax.index[i]] += grad_out[i];
  return grad;
}

template <typename T>
Tensor<T> avgpool_forward(const Tensor<T>& input, int kernel, int stride) {
  const Shape& in = input.shape();
  require_pool_fits(in, kernel, stride, "avgpool");
  const int oh = pool_out_dim(in[2], kernel, stride), ow = pool_out_dim(in[3], kernel, stride);
  Tensor<T> out(Shape{in[0], in[1], oh, ow});
  const T inv = T(1) / static_cast<T>(kernel * kernel);
  for (int n = 0; n < in[0]; ++n) {
    for (int c = 0; c < in[1]; ++c) {
      for (int y = 0; y < oh; ++y) {
        for (int x = 0; x < ow; ++x) {
          T acc = T(0);
          for (int i = 0; i < kernel; ++i) {
            for (int j = 0; j < kernel; ++j) acc += input.at(n, c, y * stride + i, x * stride + j);
          }
          out.at(n, c, y, x) = acc * inv;
        }
      }
    }
  }
  return out;
}

template <typename T>
Tensor<T> avgpool_backward(const Shape& input_shape, const Tensor<T>& grad_out, int kernel, int stride) {
  require_pool_fits(input_shape, kernel, stride, "avgpool_backward");
  const int oh = pool_out_dim(input_shape[2], kernel, stride), ow = pool_out_dim(input_shape[3], kernel, stride);
  if (grad_out.shape() != Shape{input_shape[0], input_shape[1], oh, ow}) {
    throw ShapeError("avgpool_backward: grad_out shape " + grad_out.shape().str() + " does not match output");
  }
  Tensor<T> grad(input_shape);
  const T inv = T(1) / static_cast<T>(kernel * kernel);
  for (int n = 0; n < input_shape[0]; ++n) {
    for (int c = 0; c < input_shape[1]; ++c) {
      for (int y = 0; y < oh; ++y) {
        for (int x = 0; x < ow; ++x) {
          const T g = grad_out.at(n, c, y, x) * inv;
          for (int i = 0; i < kernel; ++i) {
            for (int j = 0; j < kernel; ++j) grad.at(n, c, y * stride + i, x * stride + j) += g;
          }
        }
      }
    }
  }
  return grad;
}

template <typename T>
Tensor<T> fc_forward(const Tensor<T>& input, const Tensor<T>& weights, View<T> bias) {
  if (weights.rank() != 2) throw ShapeError("fc: weights must be (out, in)");
  const int batch = input.batch();
  const int out = weights.dim(0), in = weights.dim(1);
  if (input.features() != static_cast<std::size_t>(in)) {
    throw ShapeError("fc: input has " + std::to_string(input.features()) + " features, weights expect " +
                     std::to_string(in));
  }
  if (bias.size() != static_cast<std::size_t>(out)) throw ShapeError("fc: bias length does not match outputs");
  Tensor<T> y(Shape{batch, out});
  kernels::gemm({batch, out, in, kernels::Trans::kNo, kernels::Trans::kYes}, input.span(), weights.span(),
                y.span(), false);
  for (int n = 0; n < batch; ++n) {
    for (int o = 0; o < out; ++o) y[static_cast<std::size_t>(n) * out + o] += bias[static_cast<std::size_t>(o)];
  }
  return y;
}

template <typename T>
FcGrads<T> fc_backward(const Tensor<T>& input, const Tensor<T>& weights, const Tensor<T>& grad_out) {
  const int batch = input.batch();
  const int out = weights.dim(0), in = weights.dim(1);
  if (input.features() != static_cast<std::size_t>(in) || grad_out.shape() != Shape{batch, out}) {
    throw ShapeError("fc_backward: shape mismatch, grad_out " + grad_out.shape().str());
  }
  FcGrads<T> g{Tensor<T>(input.shape()), Tensor<T>(weights.shape()), std::vector<T>(static_cast<std::size_t>(out), T(0))};
  kernels::gemm({out, in, batch, kernels::Trans::kYes, kernels::Trans::kNo}, grad_out.span(), input.span(),
                g.weights.span(), false);
  kernels::gemm({batch, in, out}, grad_out.span(), weights.span(), g.input.span(), false);
  for (int n = 0; n < batch; ++n) {
    for (int o = 0; o < out; ++o) g.bias[static_cast<std::size_t>(o)] += grad_out[static_cast<std::size_t>(n) * out + o];
  }
  return g;
}

template <typename T>
Tensor<T> relu_forward(const Tensor<T>& x) {
  Tensor<T> y = x;
  for (auto& v : y.vec()) v = v > T(0) ? v : T(0);
  return y;
}

template <typename T>
Tensor<T> relu_backward(const Tensor<T>& x, const Tensor<T>& grad_out) {
  require_same_shape(x, grad_out, "relu_backward");
  Tensor<T> g(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) g[i] = x[i] > T(0) ? grad_out[i] : T(0);
  return g;
}

template <typename T>
DropoutResult<T> dropout_forward(const Tensor<T>& x, double p, Rng& rng, Mode mode) {
  if (!(p >= 0.0 && p < 1.0)) throw ConfigError("dropout ratio " + std::to_string(p) + " outside [0, 1)");
  DropoutResult<T> r{x, {}};
  if (mode == Mode::kEval || p == 0.0) return r;
  const T keep_scale = static_cast<T>(1.0 / (1.0 - p));
  r.mask.resize(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    r.mask[i] = rng.bernoulli(p) ? T(0) : keep_scale;
    r.output[i] *= r.mask[i];
  }
  return r;
}

template <typename T>
Tensor<T> dropout_backward(const std::vector<T>& mask, const Tensor<T>& grad_out) {
  if (mask.empty()) return grad_out;
  if (mask.size() != grad_out.size()) throw ShapeError("dropout_backward: mask does not match grad_out");
  Tensor<T> g = grad_out;
  for (std::size_t i = 0; i < g.size(); ++i) g[i] *= mask[i];
  return g;
}

template <typename T>
Tensor<T> scale_forward(const Tensor<T>& x, View<T> gamma, View<T> beta) {
  const int channels = x.rank() >= 2 ? x.dim(1) : 1;
  if (gamma.size() != static_cast<std::size_t>(channels) || beta.size() != gamma.size()) {
    throw ShapeError("scale: gamma/beta length does not match channel count " + std::to_string(channels));
  }
  const std::size_t inner = x.features() / static_cast<std::size_t>(channels);
  Tensor<T> y(x.shape());
  for (int n = 0; n < x.batch(); ++n) {
    for (int c = 0; c < channels; ++c) {
      const std::size_t base = (static_cast<std::size_t>(n) * channels + c) * inner;
      const T gm = gamma[static_cast<std::size_t>(c)], bt = beta[static_cast<std::size_t>(c)];
      for (std::size_t i = 0; i < inner; ++i) y[base + i] = x[base + i] * gm + bt;
    }
  }
  return y;
}

template <typename T>
ScaleGrads<T> scale_backward(const Tensor<T>& x, View<T> gamma, const Tensor<T>& grad_out) {
  require_same_shape(x, grad_out, "scale_backward");
  const int channels = x.rank() >= 2 ? x.dim(1) : 1;
  if (gamma.size() != static_cast<std::size_t>(channels)) throw ShapeError("scale_backward: gamma length mismatch");
  const std::size_t inner = x.features() / static_cast<std::size_t>(channels);
  ScaleGrads<T> g{Tensor<T>(x.shape()), std::vector<T>(gamma.size(), T(0)), std::vector<T>(gamma.size(), T(0))};
  for (int n = 0; n < x.batch(); ++n) {
    for (int c = 0; c < channels; ++c) {
      const std::size_t base = (static_cast<std::size_t>(n) * channels + c) * inner;
      const T gm = gamma[static_cast<std::size_t>(c)];
      T dg = T(0), db = T(0);
      for (std::size_t i = 0; i < inner; ++i) {
        const T go = grad_out[base + i];
        g.input[base + i] = go * gm;
        dg += go * x[base + i];
        db += go;
      }
      g.gamma[static_cast<std::size_t>(c)] += dg;
      g.beta[static_cast<std::size_t>(c)] += db;
    }
  }
  return g;
}

template <typename T>
Tensor<T> eltwise_add(const Tensor<T>& a, const Tensor<T>& b) {
  require_same_shape(a, b, "eltwise_add");
  Tensor<T> y = a;
  for (std::size_t i = 0; i < y.size(); ++i) y[i] += b[i];
  return y;
}

#define RCNDS_INSTANTIATE_OPS(T)                                                                           \
  template Tensor<T> conv2d_forward(const Tensor<T>&, const Tensor<T>&, View<T>, ConvConfig);      \
  template ConvGrads<T> conv2d_backward(const Tensor<T>&, const Tensor<T>&, View<T>, ConvConfig,    \
                                        const Tensor<T>&);                                                    \
  template MaxPoolResult<T> maxpool_forward(const Tensor<T>&, int, int);                                  \
  template Tensor<T> maxpool_backward(const PoolArgmax&, const Tensor<T>&);                               \
  template Tensor<T> avgpool_forward(const Tensor<T>&, int, int);                                         \
  template Tensor<T> avgpool_backward(const Shape&, const Tensor<T>&, int, int);                          \
  template Tensor<T> fc_forward(const Tensor<T>&, const Tensor<T>&, View<T>);                 \
  template FcGrads<T> fc_backward(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&);                  \
  template Tensor<T> relu_forward(const Tensor<T>&);                                                      \
  template Tensor<T> relu_backward(const Tensor<T>&, const Tensor<T>&);                                   \
  template DropoutResult<T> dropout_forward(const Tensor<T>&, double, Rng&, Mode);                        \
  template Tensor<T> dropout_backward(const std::vector<T>&, const Tensor<T>&);                           \
  template Tensor<T> scale_forward(const Tensor<T>&, View<T>, View<T>);             \
  template ScaleGrads<T> scale_backward(const Tensor<T>&, View<T>, const Tensor<T>&);          \
  template Tensor<T> eltwise_add(const Tensor<T>&, const Tensor<T>&);

RCNDS_INSTANTIATE_OPS(float)
RCNDS_INSTANTIATE_OPS(double)

#undef RCNDS_INSTANTIATE_OPS

}  // namespace rcnds::ops
