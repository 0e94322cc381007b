// AVX2/FMA backend. Compiled with -mavx2 -mfma; only dispatched to when
// __builtin_cpu_supports confirms the CPU has both.

#include "odefit/simd.hpp"

#include <cmath>
#include <cstdint>
#include <immintrin.h>

namespace odefit::simd {
namespace {

// ---- vector exp, Cephes-style rational approximation -----------------
// exp(x) = 2^n * expr(r), x = n*ln2 + r, |r| <= ln2/2. Accurate to ~1 ulp.

const __m256d LOG2E = _mm256_set1_pd(1.4426950408889634073599);
const __m256d LN2_HI = _mm256_set1_pd(6.93145751953125e-1);
const __m256d LN2_LO = _mm256_set1_pd(1.42860682030941723212e-6);
const __m256d EXP_MAX = _mm256_set1_pd(709.782712893383996843);
const __m256d EXP_MIN = _mm256_set1_pd(-708.396418532264106224);

const __m256d P0 = _mm256_set1_pd(1.26177193074810590878e-4);
const __m256d P1 = _mm256_set1_pd(3.02994407707441961300e-2);
const __m256d P2 = _mm256_set1_pd(9.99999999999999999910e-1);
const __m256d Q0 = _mm256_set1_pd(3.00198505138664455042e-6);
const __m256d Q1 = _mm256_set1_pd(2.52448340349684104192e-3);
const __m256d Q2 = _mm256_set1_pd(2.27265548208155028766e-1);
const __m256d Q3 = _mm256_set1_pd(2.00000000000000000005e0);

inline __m256d exp4(__m256d x) {
    const __m256d clamped = _mm256_max_pd(_mm256_min_pd(x, EXP_MAX), EXP_MIN);
    const __m256d underflow = _mm256_cmp_pd(x, EXP_MIN, _CMP_LT_OQ);

    __m256d n = _mm256_round_pd(_mm256_mul_pd(clamped, LOG2E),
                                _MM_FROUND_TO_NEAREST_INT | _MM_FROUND_NO_EXC);
    __m256d r = _mm256_fnmadd_pd(n, LN2_HI, clamped);
    r = _mm256_fnmadd_pd(n, LN2_LO, r);
    const __m256d r2 = _mm256_mul_pd(r, r);

    __m256d p = _mm256_fmadd_pd(P0, r2, P1);
    p = _mm256_fmadd_pd(p, r2, P2);
    p = _mm256_mul_pd(p, r);

    __m256d q = _mm256_fmadd_pd(Q0, r2, Q1);
    q = _mm256_fmadd_pd(q, r2, Q2);
    q = _mm256_fmadd_pd(q, r2, Q3);

    const __m256d e = _mm256_add_pd(
        _mm256_set1_pd(1.0),
        _mm256_div_pd(_mm256_add_pd(p, p), _mm256_sub_pd(q, p)));

    // scale by 2^n through the exponent bits
    const __m128i ni = _mm256_cvtpd_epi32(n);
    const __m256i ni64 = _mm256_cvtepi32_epi64(ni);
    const __m256i bias = _mm256_set1_epi64x(1023);
    const __m256i pow2 = _mm256_slli_epi64(_mm256_add_epi64(ni64, bias), 52);
    const __m256d scaled = _mm256_mul_pd(e, _mm256_castsi256_pd(pow2));
    return _mm256_andnot_pd(underflow, scaled);
}

void exp_v_avx2(const double* x, double* out, std::size_t n) {
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4)
        _mm256_storeu_pd(out + i, exp4(_mm256_loadu_pd(x + i)));
    for (; i < n; ++i) out[i] = std::exp(x[i]);
}

// ---- vector erf via the rescaled positive series ----------------------
//   erf(x) = (2/sqrt(pi)) exp(-x^2) sum_k (2x^2)^k x / (2k+1)!!
// All terms positive; lanes that saturate (|x| >= 6) are masked to +-1.

const __m256d TWO_OVER_SQRT_PI = _mm256_set1_pd(1.1283791670955125738961589031);
const __m256d INV_SQRT_PI = _mm256_set1_pd(0.5641895835477562869480794516);
const __m256d SIGN_MASK = _mm256_set1_pd(-0.0);

inline __m256d erf4(__m256d x) {
    const __m256d ax = _mm256_andnot_pd(SIGN_MASK, x);
    const __m256d sign = _mm256_and_pd(SIGN_MASK, x);
    const __m256d big = _mm256_cmp_pd(ax, _mm256_set1_pd(6.0), _CMP_GE_OQ);

    const __m256d s2 = _mm256_mul_pd(_mm256_set1_pd(2.0), _mm256_mul_pd(ax, ax));
    __m256d term = ax;
    __m256d sum = ax;
    for (int k = 1; k <= 200; ++k) {
        term = _mm256_mul_pd(term, _mm256_div_pd(s2, _mm256_set1_pd(double(2 * k + 1))));
        sum = _mm256_add_pd(sum, term);
        const __m256d done = _mm256_cmp_pd(
            term, _mm256_mul_pd(_mm256_set1_pd(1e-18), sum), _CMP_LT_OQ);
        if (_mm256_movemask_pd(_mm256_or_pd(done, big)) == 0xf) break;
    }
    const __m256d e = exp4(_mm256_xor_pd(_mm256_mul_pd(ax, ax), SIGN_MASK));
    __m256d r = _mm256_mul_pd(TWO_OVER_SQRT_PI, _mm256_mul_pd(e, sum));
    r = _mm256_blendv_pd(r, _mm256_set1_pd(1.0), big);
    return _mm256_or_pd(r, sign);
}

void erf_v_avx2(const double* x, double* out, std::size_t n) {
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4)
        _mm256_storeu_pd(out + i, erf4(_mm256_loadu_pd(x + i)));
    if (i < n) {
        double xin[4] = {0, 0, 0, 0}, xout[4];
        for (std::size_t j = i; j < n; ++j) xin[j - i] = x[j];
        _mm256_storeu_pd(xout, erf4(_mm256_loadu_pd(xin)));
        for (std::size_t j = i; j < n; ++j) out[j] = xout[j - i];
    }
}

void erf_antideriv_v_avx2(const double* x, double* out, std::size_t n) {
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        const __m256d v = _mm256_loadu_pd(x + i);
        const __m256d ax = _mm256_andnot_pd(SIGN_MASK, v);
        const __m256d e = exp4(_mm256_xor_pd(_mm256_mul_pd(ax, ax), SIGN_MASK));
        const __m256d h = _mm256_fmadd_pd(ax, erf4(ax), _mm256_mul_pd(e, INV_SQRT_PI));
        _mm256_storeu_pd(out + i, h);
    }
    if (i < n) {
        double xin[4] = {0, 0, 0, 0}, xout[4];
        for (std::size_t j = i; j < n; ++j) xin[j - i] = x[j];
        erf_antideriv_v_avx2(xin, xout, 4);
        for (std::size_t j = i; j < n; ++j) out[j] = xout[j - i];
    }
}

// ---- BLAS-1 style kernels ---------------------------------------------

inline double hsum(__m256d v) {
    const __m128d lo = _mm256_castpd256_pd128(v);
    const __m128d hi = _mm256_extractf128_pd(v, 1);
    const __m128d s = _mm_add_pd(lo, hi);
    return _mm_cvtsd_f64(_mm_add_sd(s, _mm_unpackhi_pd(s, s)));
}

double dot_avx2(const double* a, const double* b, std::size_t n) {
    __m256d acc0 = _mm256_setzero_pd(), acc1 = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 8 <= n; i += 8) {
        acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc0);
        acc1 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i + 4), _mm256_loadu_pd(b + i + 4), acc1);
    }
    for (; i + 4 <= n; i += 4)
        acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc0);
    double s = hsum(_mm256_add_pd(acc0, acc1));
    for (; i < n; ++i) s += a[i] * b[i];
    return s;
}

void axpy_avx2(double a, const double* x, double* y, std::size_t n) {
    const __m256d av = _mm256_set1_pd(a);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        const __m256d r = _mm256_fmadd_pd(av, _mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i));
        _mm256_storeu_pd(y + i, r);
    }
    for (; i < n; ++i) y[i] += a * x[i];
}

double sumsq_avx2(const double* a, std::size_t n) {
    __m256d acc0 = _mm256_setzero_pd(), acc1 = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 8 <= n; i += 8) {
        const __m256d v0 = _mm256_loadu_pd(a + i);
        const __m256d v1 = _mm256_loadu_pd(a + i + 4);
        acc0 = _mm256_fmadd_pd(v0, v0, acc0);
        acc1 = _mm256_fmadd_pd(v1, v1, acc1);
    }
    for (; i + 4 <= n; i += 4) {
        const __m256d v = _mm256_loadu_pd(a + i);
        acc0 = _mm256_fmadd_pd(v, v, acc0);
    }
    double s = hsum(_mm256_add_pd(acc0, acc1));
    for (; i < n; ++i) s += a[i] * a[i];
    return s;
}

void tikhonov_terms_avx2(const double* eig, const double* c, std::size_t n,
                         double lam, double* res_sq, double* semi_sq) {
    const __m256d lamv = _mm256_set1_pd(lam);
    const __m256d lam2 = _mm256_set1_pd(lam * lam);
    __m256d racc = _mm256_setzero_pd(), sacc = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        const __m256d e = _mm256_loadu_pd(eig + i);
        const __m256d cv = _mm256_loadu_pd(c + i);
        const __m256d d = _mm256_add_pd(e, lamv);
        const __m256d w = _mm256_div_pd(cv, _mm256_mul_pd(d, d));
        racc = _mm256_fmadd_pd(w, lam2, racc);
        sacc = _mm256_fmadd_pd(w, e, sacc);
    }
    double r = hsum(racc), s = hsum(sacc);
    for (; i < n; ++i) {
        const double d = eig[i] + lam;
        const double w = c[i] / (d * d);
        r += w * lam * lam;
        s += w * eig[i];
    }
    *res_sq = r;
    *semi_sq = s;
}

const Backend kAvx2 = {
    "avx2",
    exp_v_avx2,
    erf_v_avx2,
    erf_antideriv_v_avx2,
    dot_avx2,
    axpy_avx2,
    sumsq_avx2,
    tikhonov_terms_avx2,
};

} // namespace

const Backend* avx2_backend_if_supported() {
    return (__builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma")) ? &kAvx2 : nullptr;
}

} // namespace odefit::simd
