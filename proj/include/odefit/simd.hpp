#pragma once
// Runtime-dispatched SIMD kernels for the hot inner loops: elementwise
// exp/erf over arrays, dot/axpy/sum-of-squares, and the Tikhonov filter
// sweep. A scalar reference backend is always available; an AVX2+FMA
// backend is selected at startup when the CPU supports it. Backends are
// equivalence-tested against each other (see tests/test_simd.cpp).

#include <cstddef>
#include <string>
#include <vector>

namespace odefit::simd {

struct Backend {
    const char* name;
    void (*exp_v)(const double* x, double* out, std::size_t n);
    void (*erf_v)(const double* x, double* out, std::size_t n);
    // h(x) = x*erf(x) + exp(-x^2)/sqrt(pi), the erf antiderivative
    void (*erf_antideriv_v)(const double* x, double* out, std::size_t n);
    double (*dot)(const double* a, const double* b, std::size_t n);
    void (*axpy)(double a, const double* x, double* y, std::size_t n);
    double (*sumsq)(const double* a, std::size_t n);
    // residual^2 and seminorm^2 terms of the Tikhonov sweep at one lambda:
    //   res_sq  = sum_i c[i] * lam^2    / (eig[i]+lam)^2
    //   semi_sq = sum_i c[i] * eig[i]   / (eig[i]+lam)^2
    void (*tikhonov_terms)(const double* eig, const double* c, std::size_t n,
                           double lam, double* res_sq, double* semi_sq);
};

// Backend selected at process start: AVX2 when available, else scalar.
// ODEFIT_SIMD=scalar|avx2 in the environment forces a choice.
const Backend& active();
const Backend& scalar_backend();
std::vector<const Backend*> available_backends();

} // namespace odefit::simd
