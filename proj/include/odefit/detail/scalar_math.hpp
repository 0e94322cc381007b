#pragma once
// Scalar reference implementations of erf and its antiderivative.
// erf uses the rescaled power series
//   erf(x) = (2/sqrt(pi)) * exp(-x^2) * sum_{k>=0} (2x^2)^k * x / (2k+1)!!
// whose terms are all positive, so there is no cancellation; Kahan
// accumulation keeps the absolute error at a few ulp. For |x| >= 6 the
// function saturates to +-1 well below 1e-16.

#include <cmath>
#include <cstddef>

namespace odefit::detail {

inline constexpr double kTwoOverSqrtPi = 1.1283791670955125738961589031;
inline constexpr double kInvSqrtPi = 0.5641895835477562869480794516;

inline double erf_series(double x) {
    if (std::isnan(x)) return x;
    const double ax = std::fabs(x);
    if (ax >= 6.0) return x > 0 ? 1.0 : -1.0;
    const double s2 = 2.0 * ax * ax;
    double term = ax;
    double sum = ax;
    double comp = 0.0;
    for (int k = 1; k <= 200; ++k) {
        term *= s2 / static_cast<double>(2 * k + 1);
        const double y = term - comp;
        const double t = sum + y;
        comp = (t - sum) - y;
        sum = t;
        if (term < 1e-18 * sum) break;
    }
    const double r = kTwoOverSqrtPi * std::exp(-ax * ax) * sum;
    return x >= 0 ? r : -r;
}

inline double erf_antideriv_scalar(double x) {
    const double ax = std::fabs(x);
    return ax * erf_series(ax) + std::exp(-ax * ax) * kInvSqrtPi;
}

} // namespace odefit::detail
