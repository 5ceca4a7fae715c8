#include <algorithm>

#include "rcnds/kernels/kernels.hpp"

namespace rcnds::kernels::scalar {
namespace {

template <typename T>
void gemm_nn_impl(int m, int n, int k, const T* a, const T* b, T* c, bool accumulate) {
  if (!accumulate) std::fill(c, c + static_cast<std::size_t>(m) * n, T(0));
  for (int i = 0; i < m; ++i) {
    T* crow = c + static_cast<std::size_t>(i) * n;
    const T* arow = a + static_cast<std::size_t>(i) * k;
    for (int p = 0; p < k; ++p) {
      const T av = arow[p];
      const T* brow = b + static_cast<std::size_t>(p) * n;
      for (int j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

}  // namespace

void gemm_nn(int m, int n, int k, const float* a, const float* b, float* c, bool accumulate) {
  gemm_nn_impl(m, n, k, a, b, c, accumulate);
}

void gemm_nn(int m, int n, int k, const double* a, const double* b, double* c, bool accumulate) {
  gemm_nn_impl(m, n, k, a, b, c, accumulate);
}

void sgd_momentum(std::span<float> w, std::span<const float> g, std::span<float> v, float lr,
                  float momentum, float weight_decay) {
  for (std::size_t i = 0; i < w.size(); ++i) {
    v[i] = momentum * v[i] - lr * (g[i] + weight_decay * w[i]);
    w[i] += v[i];
  }
}

}  // namespace rcnds::kernels::scalar
