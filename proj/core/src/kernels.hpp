#pragma once

// Dense matrix kernels shared by the linear and convolution ops. All loops
// keep a fixed summation order, so results do not depend on the vector width
// picked at run time.

#include <cstddef>

namespace dagevo::kernels {

/// C[m, n] += A[m, k] * B[k, n], row-major, contiguous.
void gemm_nn(std::size_t m, std::size_t k, std::size_t n, const double* a, const double* b, double* c);

/// C[m, k] += G[m, n] * W[k, n]^T. `scratch` must hold k * n doubles.
void gemm_nt(std::size_t m, std::size_t n, std::size_t k, const double* g, const double* w, double* c,
             double* scratch);

/// W[k, n] += X[m, k]^T * G[m, n].
void gemm_tn(std::size_t m, std::size_t k, std::size_t n, const double* x, const double* g, double* w);

}  // namespace dagevo::kernels
