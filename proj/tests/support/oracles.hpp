#pragma once

// Independent reference implementations used by the unit and acceptance
// tests: naive loop versions of the layer forwards, and finite-difference
// problems for every backward kernel. Nothing here calls into the kernels
// under test except the function being checked.

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <string>
#include <vector>

#include "rcnds/core/rng.hpp"
#include "rcnds/core/tensor.hpp"
#include "rcnds/ops/gradcheck.hpp"
#include "rcnds/ops/layers.hpp"

namespace rcnds::testing {

template <typename T>
Tensor<T> uniform_tensor(const Shape& s, Rng& rng, double lo = -1.0, double hi = 1.0) {
  Tensor<T> t(s);
  for (auto& v : t.vec()) v = static_cast<T>(lo + (hi - lo) * rng.uniform());
  return t;
}

/// Quadruple loop over (n, o, y, x) with the window sum inside; no im2col.
inline Tensor<double> naive_conv(const Tensor<double>& in, const Tensor<double>& w, const std::vector<double>& b,
                                 int stride, int pad) {
  const int n = in.dim(0), c = in.dim(1), h = in.dim(2), wd = in.dim(3);
  const int o = w.dim(0), kh = w.dim(2), kw = w.dim(3);
  const int oh = (h + 2 * pad - kh) / stride + 1, ow = (wd + 2 * pad - kw) / stride + 1;
  Tensor<double> out(Shape{n, o, oh, ow});
  for (int bi = 0; bi < n; ++bi)
    for (int oc = 0; oc < o; ++oc)
      for (int y = 0; y < oh; ++y)
        for (int x = 0; x < ow; ++x) {
          double acc = b[static_cast<std::size_t>(oc)];
          for (int ic = 0; ic < c; ++ic)
            for (int i = 0; i < kh; ++i)
              for (int j = 0; j < kw; ++j) {
                const int iy = y * stride - pad + i, ix = x * stride - pad + j;
                if (iy < 0 || iy >= h || ix < 0 || ix >= wd) continue;
                acc += in.at(bi, ic, iy, ix) * w.at(oc, ic, i, j);
              }
          out.at(bi, oc, y, x) = acc;
        }
  return out;
}

/// Window scan; `avg` selects the mean instead of the max.
inline Tensor<double> naive_pool(const Tensor<double>& in, int k, int s, bool avg) {
  const int n = in.dim(0), c = in.dim(1), h = in.dim(2), w = in.dim(3);
  const int oh = (h - k) / s + 1, ow = (w - k) / s + 1;
  Tensor<double> out(Shape{n, c, oh, ow});
  for (int bi = 0; bi < n; ++bi)
    for (int ch = 0; ch < c; ++ch)
      for (int y = 0; y < oh; ++y)
        for (int x = 0; x < ow; ++x) {
          double best = -INFINITY, sum = 0.0;
          for (int i = 0; i < k; ++i)
            for (int j = 0; j < k; ++j) {
              const double v = in.at(bi, ch, y * s + i, x * s + j);
              best = std::max(best, v);
              sum += v;
            }
          out.at(bi, ch, y, x) = avg ? sum / (k * k) : best;
        }
  return out;
}

/// Distinct values spaced well beyond any finite-difference step, shuffled,
/// so max-pool winners never switch under perturbation.
inline Tensor<double> distinct_tensor(const Shape& s, Rng& rng) {
  Tensor<double> t(s);
  std::vector<std::size_t> order(t.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);
  for (std::size_t i = 0; i < t.size(); ++i) t[order[i]] = -1.0 + 0.05 * static_cast<double>(i);
  return t;
}

inline double dot(const Tensor<double>& a, const Tensor<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

inline Tensor<double> vec_tensor(const std::vector<double>& v) { return Tensor<double>(Shape{static_cast<int>(v.size())}, v); }

struct LayerCheck {
  std::string layer;
  ops::GradCheckResult result;
};

/// Finite-difference checks of every backward kernel in double precision.
/// Each scalar objective is <R, layer(x)> for a fixed random projection R.
inline std::vector<LayerCheck> layer_gradient_checks(std::uint64_t seed, double eps = 1e-3) {
  using namespace rcnds::ops;
  std::vector<LayerCheck> out;
  Rng rng(seed);
  GradCheckOptions opt;
  opt.epsilon = eps;

  {  // conv, stride 2 pad 1
    Tensor<double> x = uniform_tensor<double>(Shape{2, 3, 6, 5}, rng);
    Tensor<double> w = uniform_tensor<double>(Shape{4, 3, 3, 3}, rng);
    Tensor<double> b = uniform_tensor<double>(Shape{4}, rng);
    const ConvConfig cfg{2, 1};
    const Tensor<double> r = uniform_tensor<double>(conv2d_forward(x, w, b.span(), cfg).shape(), rng);
    GradCheckProblem p{{"input", "weights", "bias"}, {&x, &w, &b},
                       [&] { return dot(conv2d_forward(x, w, std::span<const double>(b.span()), cfg), r); },
                       [&] {
                         auto g = conv2d_backward(x, w, std::span<const double>(b.span()), cfg, r);
                         return std::vector<Tensor<double>>{g.input, g.weights, vec_tensor(g.bias)};
                       },
                       {}};
    out.push_back({"conv", gradient_check(p, opt)});
  }
  {  // conv, 1x1 stride 1
    Tensor<double> x = uniform_tensor<double>(Shape{1, 2, 4, 4}, rng);
    Tensor<double> w = uniform_tensor<double>(Shape{3, 2, 1, 1}, rng);
    Tensor<double> b = uniform_tensor<double>(Shape{3}, rng);
    const ConvConfig cfg{1, 0};
    const Tensor<double> r = uniform_tensor<double>(Shape{1, 3, 4, 4}, rng);
    GradCheckProblem p{{"input", "weights", "bias"}, {&x, &w, &b},
                       [&] { return dot(conv2d_forward(x, w, std::span<const double>(b.span()), cfg), r); },
                       [&] {
                         auto g = conv2d_backward(x, w, std::span<const double>(b.span()), cfg, r);
                         return std::vector<Tensor<double>>{g.input, g.weights, vec_tensor(g.bias)};
                       },
                       {}};
    out.push_back({"conv1x1", gradient_check(p, opt)});
  }
  {  // max-pool with overlapping windows (k=2, s=1) and the 3/2 stem window
    for (auto [k, s] : {std::pair{2, 1}, std::pair{3, 2}}) {
      Tensor<double> x = distinct_tensor(Shape{2, 2, 7, 7}, rng);
      const auto fwd = maxpool_forward(x, k, s);
      const Tensor<double> r = uniform_tensor<double>(fwd.output.shape(), rng);
      GradCheckProblem p{{"input"}, {&x},
                         [&] { return dot(maxpool_forward(x, k, s).output, r); },
                         [&] { return std::vector<Tensor<double>>{maxpool_backward(maxpool_forward(x, k, s).argmax, r)}; },
                         {}};
      out.push_back({"maxpool" + std::to_string(k) + "s" + std::to_string(s), gradient_check(p, opt)});
    }
  }
  {  // avg-pool 5/2 as in the supervision branch
    Tensor<double> x = uniform_tensor<double>(Shape{1, 2, 9, 9}, rng);
    const Tensor<double> r = uniform_tensor<double>(avgpool_forward(x, 5, 2).shape(), rng);
    GradCheckProblem p{{"input"}, {&x},
                       [&] { return dot(avgpool_forward(x, 5, 2), r); },
                       [&] { return std::vector<Tensor<double>>{avgpool_backward(x.shape(), r, 5, 2)}; },
                       {}};
    out.push_back({"avgpool", gradient_check(p, opt)});
  }
  {  // fully connected on a 4-D input (implicit flatten)
    Tensor<double> x = uniform_tensor<double>(Shape{3, 2, 2, 2}, rng);
    Tensor<double> w = uniform_tensor<double>(Shape{5, 8}, rng);
    Tensor<double> b = uniform_tensor<double>(Shape{5}, rng);
    const Tensor<double> r = uniform_tensor<double>(Shape{3, 5}, rng);
    GradCheckProblem p{{"input", "weights", "bias"}, {&x, &w, &b},
                       [&] { return dot(fc_forward(x, w, std::span<const double>(b.span())), r); },
                       [&] {
                         auto g = fc_backward(x, w, r);
                         return std::vector<Tensor<double>>{g.input, g.weights, vec_tensor(g.bias)};
                       },
                       {}};
    out.push_back({"fc", gradient_check(p, opt)});
  }
  {  // relu, probed away from the kink
    Tensor<double> x = uniform_tensor<double>(Shape{2, 3, 4, 4}, rng);
    const Tensor<double> r = uniform_tensor<double>(x.shape(), rng);
    GradCheckProblem p{{"input"}, {&x},
                       [&] { return dot(relu_forward(x), r); },
                       [&] { return std::vector<Tensor<double>>{relu_backward(x, r)}; },
                       [&](std::size_t, std::size_t i) { return std::abs(x[i]) <= 10 * eps; }};
    out.push_back({"relu", gradient_check(p, opt)});
  }
  {  // dropout with a frozen mask
    Tensor<double> x = uniform_tensor<double>(Shape{4, 10}, rng);
    const Tensor<double> r = uniform_tensor<double>(x.shape(), rng);
    const std::uint64_t mask_seed = rng.next_u64();
    auto run = [&] {
      Rng m(mask_seed);
      return dropout_forward(x, 0.5, m, Mode::kTrain);
    };
    GradCheckProblem p{{"input"}, {&x},
                       [&] { return dot(run().output, r); },
                       [&] { return std::vector<Tensor<double>>{dropout_backward(run().mask, r)}; },
                       {}};
    out.push_back({"dropout", gradient_check(p, opt)});
  }
  {  // scale
    Tensor<double> x = uniform_tensor<double>(Shape{2, 3, 3, 3}, rng);
    Tensor<double> gamma = uniform_tensor<double>(Shape{3}, rng, 0.5, 1.5);
    Tensor<double> beta = uniform_tensor<double>(Shape{3}, rng);
    const Tensor<double> r = uniform_tensor<double>(x.shape(), rng);
    GradCheckProblem p{{"input", "gamma", "beta"}, {&x, &gamma, &beta},
                       [&] { return dot(scale_forward(x, std::span<const double>(gamma.span()), std::span<const double>(beta.span())), r); },
                       [&] {
                         auto g = scale_backward(x, std::span<const double>(gamma.span()), r);
                         return std::vector<Tensor<double>>{g.input, vec_tensor(g.gamma), vec_tensor(g.beta)};
                       },
                       {}};
    out.push_back({"scale", gradient_check(p, opt)});
  }
  {  // element-wise add: the incoming gradient goes unchanged to both arms
    Tensor<double> a = uniform_tensor<double>(Shape{2, 2, 3, 3}, rng);
    Tensor<double> b = uniform_tensor<double>(a.shape(), rng);
    const Tensor<double> r = uniform_tensor<double>(a.shape(), rng);
    GradCheckProblem p{{"a", "b"}, {&a, &b},
                       [&] { return dot(eltwise_add(a, b), r); },
                       [&] { return std::vector<Tensor<double>>{r, r}; },
                       {}};
    out.push_back({"eltwise_add", gradient_check(p, opt)});
  }
  return out;
}

}  // namespace rcnds::testing
