#pragma once

// Dense double-precision kernels used by the tensor, metric and sampling code.
//
// Every kernel has a portable scalar reference implementation and, on x86-64,
// an AVX2+FMA variant. The variant is picked once at startup from CPUID; set
// SHORTDESC_FORCE_SCALAR=1 in the environment to pin the reference path.
// All matrices are row-major and densely packed.

#include <cstddef>
#include <string_view>

namespace shortdesc::kernels {

enum class Isa { scalar, avx2 };

struct KernelTable {
  Isa isa;
  double (*dot)(const double* a, const double* b, std::size_t n);
  // y += alpha * x
  void (*axpy)(double alpha, const double* x, double* y, std::size_t n);
  // sum_k (a_k - b_k)^2
  double (*squared_distance)(const double* a, const double* b, std::size_t n);
  // C[m x n] += A[m x k] * B[k x n]
  void (*gemm_nn)(const double* a, const double* b, double* c, std::size_t m,
                  std::size_t k, std::size_t n);
  // C[m x n] += A[m x k] * B[n x k]^T
  void (*gemm_nt)(const double* a, const double* b, double* c, std::size_t m,
                  std::size_t k, std::size_t n);
  // C[k x n] += A[m x k]^T * B[m x n]
  void (*gemm_tn)(const double* a, const double* b, double* c, std::size_t m,
                  std::size_t k, std::size_t n);
};

const KernelTable& scalar_table();
// Returns nullptr when the binary was built without AVX2 support or the
// running CPU lacks AVX2/FMA.
const KernelTable* avx2_table();

// The table selected for this process.
const KernelTable& active();

bool cpu_supports_avx2();
std::string_view isa_name(Isa isa);

inline double dot(const double* a, const double* b, std::size_t n) {
  return active().dot(a, b, n);
}
inline void axpy(double alpha, const double* x, double* y, std::size_t n) {
  active().axpy(alpha, x, y, n);
}
inline double squared_distance(const double* a, const double* b, std::size_t n) {
  return active().squared_distance(a, b, n);
}
inline void gemm_nn(const double* a, const double* b, double* c, std::size_t m,
                    std::size_t k, std::size_t n) {
  active().gemm_nn(a, b, c, m, k, n);
}
inline void gemm_nt(const double* a, const double* b, double* c, std::size_t m,
                    std::size_t k, std::size_t n) {
  active().gemm_nt(a, b, c, m, k, n);
}
inline void gemm_tn(const double* a, const double* b, double* c, std::size_t m,
                    std::size_t k, std::size_t n) {
  active().gemm_tn(a, b, c, m, k, n);
}

}  // namespace shortdesc::kernels
