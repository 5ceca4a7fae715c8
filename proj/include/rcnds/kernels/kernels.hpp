#pragma once

// Data-parallel inner loops. Every kernel has a portable scalar reference
// implementation and, on x86-64, an AVX2+FMA variant chosen at runtime.
// The double-precision path always runs the scalar reference.

#include <cstddef>
#include <span>

namespace rcnds::kernels {

enum class Backend { kScalar, kAvx2 };

const char* to_string(Backend b);

/// True when the CPU and the build both support the backend.
bool backend_available(Backend b);

/// The backend used by the dispatching entry points. Picked on first use:
/// AVX2 when available unless RCNDS_KERNELS=scalar is set.
Backend active_backend();

/// Overrides the dispatch choice (tests, benchmarks). Falls back to scalar
/// when the requested backend is unavailable; returns the backend in effect.
Backend set_backend(Backend b);

enum class Trans : bool { kNo = false, kYes = true };

/// C(m x n) = op(A) * op(B) (+ C when accumulate). All matrices contiguous,
/// row-major: op(A) is m x k, op(B) is k x n. A stored as (m x k) or, when
/// transposed, (k x m); likewise B.
struct GemmShape {
  int m, n, k;
  Trans trans_a = Trans::kNo;
  Trans trans_b = Trans::kNo;
};

void gemm(const GemmShape& s, std::span<const float> a, std::span<const float> b,
          std::span<float> c, bool accumulate);
void gemm(const GemmShape& s, std::span<const double> a, std::span<const double> b,
          std::span<double> c, bool accumulate);

/// Momentum SGD on one tensor:
///   v <- momentum*v - lr*(g + weight_decay*w);  w <- w + v
void sgd_momentum(std::span<float> w, std::span<const float> g, std::span<float> v, float lr,
                  float momentum, float weight_decay);

namespace scalar {
// NN product on contiguous row-major operands: C (+)= A(m x k) B(k x n).
void gemm_nn(int m, int n, int k, const float* a, const float* b, float* c, bool accumulate);
void gemm_nn(int m, int n, int k, const double* a, const double* b, double* c, bool accumulate);
void sgd_momentum(std::span<float> w, std::span<const float> g, std::span<float> v, float lr,
                  float momentum, float weight_decay);
}  // namespace scalar

namespace avx2 {
void gemm_nn(int m, int n, int k, const float* a, const float* b, float* c, bool accumulate);
void sgd_momentum(std::span<float> w, std::span<const float> g, std::span<float> v, float lr,
                  float momentum, float weight_decay);
}  // namespace avx2

}  // namespace rcnds::kernels
