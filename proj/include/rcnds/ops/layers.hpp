#pragma once

// Forward/backward kernels for every layer kind of the engine. Pure
// functions over explicitly passed tensors; instantiated for float (training
// path) and double (gradient-check shadow path).
//
// Shape rules (floor mode):
//   conv  h' = floor((h + 2*pad - kh) / stride) + 1
//   pool  h' = floor((h - k) / stride) + 1

#include <cstddef>
#include <span>
#include <type_traits>
#include <vector>

#include "rcnds/core/rng.hpp"
#include "rcnds/core/tensor.hpp"

namespace rcnds::ops {

enum class Mode { kTrain, kEval };

/// Read-only vector argument; not deduced, so vectors and mutable spans convert.
template <typename T>
using View = std::type_identity_t<std::span<const T>>;

int conv_out_dim(int in, int kernel, int stride, int pad);
int pool_out_dim(int in, int kernel, int stride);

template <typename T>
struct ConvParams {
  Tensor<T> weights;  // (out_ch, in_ch, kh, kw)
  std::vector<T> bias;
  int stride = 1;
  int pad = 0;

  int out_channels() const { return weights.dim(0); }
  int in_channels() const { return weights.dim(1); }
  int kernel_h() const { return weights.dim(2); }
  int kernel_w() const { return weights.dim(3); }
};

template <typename T>
struct ConvGrads {
  Tensor<T> input;
  Tensor<T> weights;
  std::vector<T> bias;
};

struct ConvConfig {
  int stride = 1;
  int pad = 0;
};

/// Cross-correlation plus per-output-channel bias. Input (n, in_ch, h, w),
/// weights (out_ch, in_ch, kh, kw).
template <typename T>
Tensor<T> conv2d_forward(const Tensor<T>& input, const Tensor<T>& weights, View<T> bias, ConvConfig cfg);

template <typename T>
ConvGrads<T> conv2d_backward(const Tensor<T>& input, const Tensor<T>& weights, View<T> bias,
                             ConvConfig cfg, const Tensor<T>& grad_out);

template <typename T>
Tensor<T> conv2d_forward(const Tensor<T>& input, const ConvParams<T>& p) {
  return conv2d_forward(input, p.weights, std::span<const T>(p.bias), ConvConfig{p.stride, p.pad});
}

template <typename T>
ConvGrads<T> conv2d_backward(const Tensor<T>& input, const ConvParams<T>& p, const Tensor<T>& grad_out) {
  return conv2d_backward(input, p.weights, std::span<const T>(p.bias), ConvConfig{p.stride, p.pad}, grad_out);
}

/// Winning input offset for every output cell of a max-pool.
struct PoolArgmax {
  Shape input_shape;
  Shape output_shape;
  std::vector<std::size_t> index;
};

template <typename T>
struct MaxPoolResult {
  Tensor<T> output;
  PoolArgmax argmax;
};

/// Ties resolve to the first maximum in row-major window order.
template <typename T>
MaxPoolResult<T> maxpool_forward(const Tensor<T>& input, int kernel, int stride);

/// Routes each gradient to its argmax; overlapping windows accumulate.
template <typename T>
Tensor<T> maxpool_backward(const PoolArgmax& argmax, const Tensor<T>& grad_out);

template <typename T>
Tensor<T> avgpool_forward(const Tensor<T>& input, int kernel, int stride);

template <typename T>
Tensor<T> avgpool_backward(const Shape& input_shape, const Tensor<T>& grad_out, int kernel, int stride);

template <typename T>
struct FcGrads {
  Tensor<T> input;  // same shape as the forward input
  Tensor<T> weights;
  std::vector<T> bias;
};

/// y = W x + b per batch row. The input is flattened past the batch
/// dimension; weights are (out, in). Output is 2-D (n, out).
template <typename T>
Tensor<T> fc_forward(const Tensor<T>& input, const Tensor<T>& weights, View<T> bias);

template <typename T>
FcGrads<T> fc_backward(const Tensor<T>& input, const Tensor<T>& weights, const Tensor<T>& grad_out);

template <typename T>
Tensor<T> relu_forward(const Tensor<T>& x);

/// Gradient gated on the forward input being strictly positive.
template <typename T>
Tensor<T> relu_backward(const Tensor<T>& x, const Tensor<T>& grad_out);

template <typename T>
struct DropoutResult {
  Tensor<T> output;
  std::vector<T> mask;  // 0 or 1/(1-p) per element; empty means identity
};

/// Inverted dropout: train mode zeroes with probability p and scales the
/// survivors by 1/(1-p); eval mode is the identity.
template <typename T>
DropoutResult<T> dropout_forward(const Tensor<T>& x, double p, Rng& rng, Mode mode);

template <typename T>
Tensor<T> dropout_backward(const std::vector<T>& mask, const Tensor<T>& grad_out);

/// Per-channel affine x * gamma_c + beta_c (channel is dim 1).
template <typename T>
Tensor<T> scale_forward(const Tensor<T>& x, View<T> gamma, View<T> beta);

template <typename T>
struct ScaleGrads {
  Tensor<T> input;
  std::vector<T> gamma;
  std::vector<T> beta;
};

template <typename T>
ScaleGrads<T> scale_backward(const Tensor<T>& x, View<T> gamma, const Tensor<T>& grad_out);

/// Element-wise sum of equally shaped tensors. Its backward hands the
/// incoming gradient unchanged to both arms.
template <typename T>
Tensor<T> eltwise_add(const Tensor<T>& a, const Tensor<T>& b);

}  // namespace rcnds::ops
