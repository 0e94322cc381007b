#include "odefit/simd.hpp"
#include "odefit/detail/scalar_math.hpp"

#include <cmath>
#include <cstdlib>
#include <cstring>
#include <stdexcept>

namespace odefit::simd {

#if defined(ODEFIT_HAVE_AVX2)
// Defined in simd_avx2.cpp; returns nullptr when the CPU lacks AVX2/FMA.
const Backend* avx2_backend_if_supported();
#else
inline const Backend* avx2_backend_if_supported() { return nullptr; }
#endif

namespace {

void exp_v_scalar(const double* x, double* out, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) out[i] = std::exp(x[i]);
}

void erf_v_scalar(const double* x, double* out, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) out[i] = detail::erf_series(x[i]);
}

void erf_antideriv_v_scalar(const double* x, double* out, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) out[i] = detail::erf_antideriv_scalar(x[i]);
}

double dot_scalar(const double* a, const double* b, std::size_t n) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += a[i] * b[i];
    return s;
}

void axpy_scalar(double a, const double* x, double* y, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) y[i] += a * x[i];
}

double sumsq_scalar(const double* a, std::size_t n) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += a[i] * a[i];
    return s;
}

void tikhonov_terms_scalar(const double* eig, const double* c, std::size_t n,
                           double lam, double* res_sq, double* semi_sq) {
    double r = 0.0, s = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double d = eig[i] + lam;
        const double w = c[i] / (d * d);
        r += w * lam * lam;
        s += w * eig[i];
    }
    *res_sq = r;
    *semi_sq = s;
}

const Backend kScalar = {
    "scalar",
    exp_v_scalar,
    erf_v_scalar,
    erf_antideriv_v_scalar,
    dot_scalar,
    axpy_scalar,
    sumsq_scalar,
    tikhonov_terms_scalar,
};

const Backend* pick_active() {
    const Backend* avx2 = avx2_backend_if_supported();
    if (const char* force = std::getenv("ODEFIT_SIMD")) {
        if (std::strcmp(force, "scalar") == 0) return &kScalar;
        if (std::strcmp(force, "avx2") == 0) {
            if (!avx2) throw std::runtime_error("ODEFIT_SIMD=avx2 but AVX2 is unavailable");
            return avx2;
        }
        throw std::runtime_error(std::string("unknown ODEFIT_SIMD backend: ") + force);
    }
    return avx2 ? avx2 : &kScalar;
}

} // namespace

const Backend& scalar_backend() { return kScalar; }

const Backend& active() {
    static const Backend* chosen = pick_active();
    return *chosen;
}

std::vector<const Backend*> available_backends() {
    std::vector<const Backend*> out{&kScalar};
    if (const Backend* b = avx2_backend_if_supported()) out.push_back(b);
    return out;
}

} // namespace odefit::simd
