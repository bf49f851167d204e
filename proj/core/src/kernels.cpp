#include "kernels.hpp"

#if defined(__GNUC__) && !defined(__clang__) && defined(__x86_64__) && defined(__linux__)
#define DAGEVO_MULTIVERSION __attribute__((target_clones("avx2", "default")))
#else
#define DAGEVO_MULTIVERSION
#endif

namespace dagevo::kernels {

DAGEVO_MULTIVERSION
void gemm_nn(std::size_t m, std::size_t k, std::size_t n, const double* a, const double* b, double* c) {
    for (std::size_t i = 0; i < m; ++i) {
        double* __restrict ci = c + i * n;
        const double* ai = a + i * k;
        for (std::size_t p = 0; p < k; ++p) {
            const double s = ai[p];
            if (s == 0.0) {
                continue;
            }
            const double* __restrict bp = b + p * n;
            for (std::size_t j = 0; j < n; ++j) {
                ci[j] += s * bp[j];
            }
        }
    }
}

void gemm_nt(std::size_t m, std::size_t n, std::size_t k, const double* g, const double* w, double* c,
             double* scratch) {
    for (std::size_t p = 0; p < k; ++p) {
        for (std::size_t j = 0; j < n; ++j) {
            scratch[j * k + p] = w[p * n + j];
        }
    }
    gemm_nn(m, n, k, g, scratch, c);
}

DAGEVO_MULTIVERSION
void gemm_tn(std::size_t m, std::size_t k, std::size_t n, const double* x, const double* g, double* w) {
    for (std::size_t r = 0; r < m; ++r) {
        const double* xr = x + r * k;
        const double* __restrict gr = g + r * n;
        for (std::size_t p = 0; p < k; ++p) {
            const double s = xr[p];
            if (s == 0.0) {
                continue;
            }
            double* __restrict wp = w + p * n;
            for (std::size_t j = 0; j < n; ++j) {
                wp[j] += s * gr[j];
            }
        }
    }
}

}  // namespace dagevo::kernels
