// Compiled with -mavx2 -mfma; only reached after a runtime CPU check.

#include <immintrin.h>

#include <cstdint>

#include "rcnds/kernels/kernels.hpp"

namespace rcnds::kernels::avx2 {
namespace {

// Lane mask selecting the first `count` of 8 lanes.
inline __m256i tail_mask(int count) {
  alignas(32) static const std::int32_t table[16] = {-1, -1, -1, -1, -1, -1, -1, -1,
                                                     0,  0,  0,  0,  0,  0,  0,  0};
  return _mm256_loadu_si256(reinterpret_cast<const __m256i*>(table + 8 - count));
}

// MR rows of C by 8*NV columns starting at c; B panel columns start at b.
template <int MR, int NV>
inline void micro(int n, int k, const float* a, const float* b, float* c, bool accumulate) {
  __m256 acc[MR][NV];
  for (int r = 0; r < MR; ++r) {
    for (int v = 0; v < NV; ++v) {
      acc[r][v] = accumulate ? _mm256_loadu_ps(c + static_cast<std::size_t>(r) * n + 8 * v)
                             : _mm256_setzero_ps();
    }
  }
  for (int p = 0; p < k; ++p) {
    const float* brow = b + static_cast<std::size_t>(p) * n;
    __m256 bv[NV];
    for (int v = 0; v < NV; ++v) bv[v] = _mm256_loadu_ps(brow + 8 * v);
    for (int r = 0; r < MR; ++r) {
      const __m256 av = _mm256_broadcast_ss(a + static_cast<std::size_t>(r) * k + p);
      for (int v = 0; v < NV; ++v) acc[r][v] = _mm256_fmadd_ps(av, bv[v], acc[r][v]);
    }
  }
  for (int r = 0; r < MR; ++r) {
    for (int v = 0; v < NV; ++v) _mm256_storeu_ps(c + static_cast<std::size_t>(r) * n + 8 * v, acc[r][v]);
  }
}

// Fewer than 8 trailing columns.
template <int MR>
inline void micro_tail(int n, int k, int cols, const float* a, const float* b, float* c, bool accumulate) {
  const __m256i mask = tail_mask(cols);
  __m256 acc[MR];
  for (int r = 0; r < MR; ++r) {
    acc[r] = accumulate ? _mm256_maskload_ps(c + static_cast<std::size_t>(r) * n, mask)
                        : _mm256_setzero_ps();
  }
  for (int p = 0; p < k; ++p) {
    const __m256 bv = _mm256_maskload_ps(b + static_cast<std::size_t>(p) * n, mask);
    for (int r = 0; r < MR; ++r) {
      const __m256 av = _mm256_broadcast_ss(a + static_cast<std::size_t>(r) * k + p);
      acc[r] = _mm256_fmadd_ps(av, bv, acc[r]);
    }
  }
  for (int r = 0; r < MR; ++r) _mm256_maskstore_ps(c + static_cast<std::size_t>(r) * n, mask, acc[r]);
}

template <int NV>
inline void column_block(int m, int n, int k, const float* a, const float* b, float* c, bool accumulate) {
  int i = 0;
  for (; i + 4 <= m; i += 4) {
    micro<4, NV>(n, k, a + static_cast<std::size_t>(i) * k, b, c + static_cast<std::size_t>(i) * n, accumulate);
  }
  for (; i < m; ++i) {
    micro<1, NV>(n, k, a + static_cast<std::size_t>(i) * k, b, c + static_cast<std::size_t>(i) * n, accumulate);
  }
}

}  // namespace

void gemm_nn(int m, int n, int k, const float* a, const float* b, float* c, bool accumulate) {
  // Column panels outermost so a k x 16 slice of B stays hot while every row of A passes over it.
  int j = 0;
  for (; j + 16 <= n; j += 16) column_block<2>(m, n, k, a, b + j, c + j, accumulate);
  for (; j + 8 <= n; j += 8) column_block<1>(m, n, k, a, b + j, c + j, accumulate);
  if (j < n) {
    const int cols = n - j;
    int i = 0;
    for (; i + 4 <= m; i += 4) {
      micro_tail<4>(n, k, cols, a + static_cast<std::size_t>(i) * k, b + j,
                    c + static_cast<std::size_t>(i) * n + j, accumulate);
    }
    for (; i < m; ++i) {
      micro_tail<1>(n, k, cols, a + static_cast<std::size_t>(i) * k, b + j,
                    c + static_cast<std::size_t>(i) * n + j, accumulate);
    }
  }
}

void sgd_momentum(std::span<float> w, std::span<const float> g, std::span<float> v, float lr,
                  float momentum, float weight_decay) {
  const std::size_t n = w.size();
  const __m256 vm = _mm256_set1_ps(momentum);
  const __m256 vlr = _mm256_set1_ps(lr);
  const __m256 vwd = _mm256_set1_ps(weight_decay);
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    const __m256 wi = _mm256_loadu_ps(w.data() + i);
    const __m256 gi = _mm256_loadu_ps(g.data() + i);
    const __m256 step = _mm256_mul_ps(vlr, _mm256_fmadd_ps(vwd, wi, gi));
    const __m256 vi = _mm256_fmsub_ps(vm, _mm256_loadu_ps(v.data() + i), step);
    _mm256_storeu_ps(v.data() + i, vi);
    _mm256_storeu_ps(w.data() + i, _mm256_add_ps(wi, vi));
  }
  for (; i < n; ++i) {
    v[i] = momentum * v[i] - lr * (g[i] + weight_decay * w[i]);
    w[i] += v[i];
  }
}

}  // namespace rcnds::kernels::avx2
