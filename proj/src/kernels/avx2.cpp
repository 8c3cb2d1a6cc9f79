// Compiled with -mavx2 -mfma. Nothing in this file may run before
// cpu_supports_avx2() has returned true.

#include "shortdesc/kernels/kernels.hpp"

#include <immintrin.h>

namespace shortdesc::kernels {
namespace {

inline double hsum(__m256d v) {
  __m128d lo = _mm256_castpd256_pd128(v);
  __m128d hi = _mm256_extractf128_pd(v, 1);
  lo = _mm_add_pd(lo, hi);
  __m128d sh = _mm_unpackhi_pd(lo, lo);
  return _mm_cvtsd_f64(_mm_add_sd(lo, sh));
}

double dot_avx2(const double* a, const double* b, std::size_t n) {
  __m256d acc0 = _mm256_setzero_pd();
  __m256d acc1 = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc0);
    acc1 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i + 4), _mm256_loadu_pd(b + i + 4), acc1);
  }
  for (; i + 4 <= n; i += 4)
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc0);
  double acc = hsum(_mm256_add_pd(acc0, acc1));
  for (; i < n; ++i) acc += a[i] * b[i];
  return acc;
}

void axpy_avx2(double alpha, const double* x, double* y, std::size_t n) {
  const __m256d va = _mm256_set1_pd(alpha);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4)
    _mm256_storeu_pd(y + i, _mm256_fmadd_pd(va, _mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i)));
  for (; i < n; ++i) y[i] += alpha * x[i];
}

double squared_distance_avx2(const double* a, const double* b, std::size_t n) {
  __m256d acc = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d d = _mm256_sub_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i));
    acc = _mm256_fmadd_pd(d, d, acc);
  }
  double s = hsum(acc);
  for (; i < n; ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return s;
}

void gemm_nn_avx2(const double* a, const double* b, double* c, std::size_t m,
                  std::size_t k, std::size_t n) {
  // 4 rows of B per pass keep C[i] in registers for narrow matrices.
  for (std::size_t i = 0; i < m; ++i) {
    double* ci = c + i * n;
    const double* ai = a + i * k;
    std::size_t p = 0;
    for (; p + 4 <= k; p += 4) {
      const __m256d a0 = _mm256_set1_pd(ai[p]);
      const __m256d a1 = _mm256_set1_pd(ai[p + 1]);
      const __m256d a2 = _mm256_set1_pd(ai[p + 2]);
      const __m256d a3 = _mm256_set1_pd(ai[p + 3]);
      const double* b0 = b + p * n;
      const double* b1 = b0 + n;
      const double* b2 = b1 + n;
      const double* b3 = b2 + n;
      std::size_t j = 0;
      for (; j + 4 <= n; j += 4) {
        __m256d acc = _mm256_loadu_pd(ci + j);
        acc = _mm256_fmadd_pd(a0, _mm256_loadu_pd(b0 + j), acc);
        acc = _mm256_fmadd_pd(a1, _mm256_loadu_pd(b1 + j), acc);
        acc = _mm256_fmadd_pd(a2, _mm256_loadu_pd(b2 + j), acc);
        acc = _mm256_fmadd_pd(a3, _mm256_loadu_pd(b3 + j), acc);
        _mm256_storeu_pd(ci + j, acc);
      }
      for (; j < n; ++j)
        ci[j] += ai[p] * b0[j] + ai[p + 1] * b1[j] + ai[p + 2] * b2[j] + ai[p + 3] * b3[j];
    }
    for (; p < k; ++p) axpy_avx2(ai[p], b + p * n, ci, n);
  }
}

void gemm_nt_avx2(const double* a, const double* b, double* c, std::size_t m,
                  std::size_t k, std::size_t n) {
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) c[i * n + j] += dot_avx2(a + i * k, b + j * k, k);
}

void gemm_tn_avx2(const double* a, const double* b, double* c, std::size_t m,
                  std::size_t k, std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    const double* bi = b + i * n;
    const double* ai = a + i * k;
    for (std::size_t p = 0; p < k; ++p) {
      if (ai[p] == 0.0) continue;
      axpy_avx2(ai[p], bi, c + p * n, n);
    }
  }
}

}  // namespace

const KernelTable* avx2_table() {
  static const KernelTable table{Isa::avx2,    dot_avx2,     axpy_avx2,
                                 squared_distance_avx2,      gemm_nn_avx2,
                                 gemm_nt_avx2, gemm_tn_avx2};
  return cpu_supports_avx2() ? &table : nullptr;
}

}  // namespace shortdesc::kernels
