#include <atomic>
#include <cstdlib>
#include <cstring>
#include <string>
#include <vector>

#include "rcnds/core/error.hpp"
#include "rcnds/kernels/kernels.hpp"

namespace rcnds::kernels {
namespace {

bool cpu_has_avx2() {
#if defined(RCNDS_HAVE_AVX2) && (defined(__x86_64__) || defined(__i386__))
  __builtin_cpu_init();
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
  return false;
#endif
}

Backend initial_backend() {
  const char* env = std::getenv("RCNDS_KERNELS");
  if (env && std::strcmp(env, "scalar") == 0) return Backend::kScalar;
  return cpu_has_avx2() ? Backend::kAvx2 : Backend::kScalar;
}

std::atomic<Backend>& backend_slot() {
  static std::atomic<Backend> slot{initial_backend()};
  return slot;
}

template <typename T>
void transpose_into(const T* src, int rows, int cols, std::vector<T>& dst) {
  dst.resize(static_cast<std::size_t>(rows) * cols);
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) {
      dst[static_cast<std::size_t>(c) * rows + r] = src[static_cast<std::size_t>(r) * cols + c];
    }
  }
}

template <typename T>
void check_sizes(const GemmShape& s, std::size_t a, std::size_t b, std::size_t c) {
  const auto m = static_cast<std::size_t>(s.m), n = static_cast<std::size_t>(s.n),
             k = static_cast<std::size_t>(s.k);
  if (s.m < 1 || s.n < 1 || s.k < 1 || a < m * k || b < k * n || c < m * n) {
    throw ShapeError("gemm: operand sizes do not match m=" + std::to_string(s.m) +
                     " n=" + std::to_string(s.n) + " k=" + std::to_string(s.k));
  }
}

// Brings op(A) and op(B) to plain row-major form, then runs the NN kernel.
template <typename T, typename Kernel>
void gemm_via_nn(const GemmShape& s, std::span<const T> a, std::span<const T> b, std::span<T> c,
                 bool accumulate, Kernel kernel) {
  check_sizes<T>(s, a.size(), b.size(), c.size());
  thread_local std::vector<T> a_buf, b_buf;
  const T* ap = a.data();
  const T* bp = b.data();
  if (s.trans_a == Trans::kYes) {
    transpose_into(ap, s.k, s.m, a_buf);
    ap = a_buf.data();
  }
  if (s.trans_b == Trans::kYes) {
    transpose_into(bp, s.n, s.k, b_buf);
    bp = b_buf.data();
  }
  kernel(s.m, s.n, s.k, ap, bp, c.data(), accumulate);
}

}  // namespace

const char* to_string(Backend b) { return b == Backend::kAvx2 ? "avx2" : "scalar"; }

bool backend_available(Backend b) { return b == Backend::kScalar || cpu_has_avx2(); }

Backend active_backend() { return backend_slot().load(std::memory_order_relaxed); }

Backend set_backend(Backend b) {
  if (!backend_available(b)) b = Backend::kScalar;
  backend_slot().store(b, std::memory_order_relaxed);
  return b;
}

void gemm(const GemmShape& s, std::span<const float> a, std::span<const float> b, std::span<float> c,
          bool accumulate) {
#if defined(RCNDS_HAVE_AVX2)
  if (active_backend() == Backend::kAvx2) {
    gemm_via_nn<float>(s, a, b, c, accumulate, [](int m, int n, int k, const float* x, const float* y,
                                                  float* z, bool acc) { avx2::gemm_nn(m, n, k, x, y, z, acc); });
    return;
  }
#endif
  gemm_via_nn<float>(s, a, b, c, accumulate, [](int m, int n, int k, const float* x, const float* y,
                                                float* z, bool acc) { scalar::gemm_nn(m, n, k, x, y, z, acc); });
}

void gemm(const GemmShape& s, std::span<const double> a, std::span<const double> b,
          std::span<double> c, bool accumulate) {
  gemm_via_nn<double>(s, a, b, c, accumulate,
                      [](int m, int n, int k, const double* x, const double* y, double* z, bool acc) {
                        scalar::gemm_nn(m, n, k, x, y, z, acc);
                      });
}

void sgd_momentum(std::span<float> w, std::span<const float> g, std::span<float> v, float lr,
                  float momentum, float weight_decay) {
  if (g.size() != w.size() || v.size() != w.size()) {
    throw ShapeError("sgd step: parameter, gradient and velocity sizes differ");
  }
#if defined(RCNDS_HAVE_AVX2)
  if (active_backend() == Backend::kAvx2) {
    avx2::sgd_momentum(w, g, v, lr, momentum, weight_decay);
    return;
  }
#endif
  scalar::sgd_momentum(w, g, v, lr, momentum, weight_decay);
}

}  // namespace rcnds::kernels
