#pragma once

#include <cstddef>

#include "ccan/tensor.hpp"

// Dense row-major GEMM kernels. Each output element is accumulated over the
// inner index in ascending order, starting from the existing value of C.
namespace ccan::kernels {

// C[m x n] += A[m x k] . B[k x n]
inline void gemm_nn(std::size_t m, std::size_t k, std::size_t n, const Scalar* __restrict a,
                    const Scalar* __restrict b, Scalar* __restrict c) {
  for (std::size_t i = 0; i < m; ++i) {
    Scalar* ci = c + i * n;
    const Scalar* ai = a + i * k;
    for (std::size_t p = 0; p < k; ++p) {
      const Scalar av = ai[p];
      const Scalar* bp = b + p * n;
      for (std::size_t j = 0; j < n; ++j) ci[j] += av * bp[j];
    }
  }
}

// C[m x n] += A[k x m]^T . B[k x n]
inline void gemm_tn(std::size_t m, std::size_t k, std::size_t n, const Scalar* __restrict a,
                    const Scalar* __restrict b, Scalar* __restrict c) {
  for (std::size_t p = 0; p < k; ++p) {
    const Scalar* ap = a + p * m;
    const Scalar* bp = b + p * n;
    for (std::size_t i = 0; i < m; ++i) {
      const Scalar av = ap[i];
      Scalar* ci = c + i * n;
      for (std::size_t j = 0; j < n; ++j) ci[j] += av * bp[j];
    }
  }
}

// C[m x n] += A[m x k] . B[n x k]^T
inline void gemm_nt(std::size_t m, std::size_t k, std::size_t n, const Scalar* __restrict a,
                    const Scalar* __restrict b, Scalar* __restrict c) {
  for (std::size_t i = 0; i < m; ++i) {
    const Scalar* ai = a + i * k;
    for (std::size_t j = 0; j < n; ++j) {
      const Scalar* bj = b + j * k;
      Scalar acc = c[i * n + j];
      for (std::size_t p = 0; p < k; ++p) acc += ai[p] * bj[p];
      c[i * n + j] = acc;
    }
  }
}

}  // namespace ccan::kernels
