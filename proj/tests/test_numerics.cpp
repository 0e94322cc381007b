#include <doctest.h>

#include "odefit/numerics.hpp"
#include "test_util.hpp"

#include <cmath>
#include <cstdlib>
#include <vector>

using namespace odefit;

namespace {

// Independent oracle for erf: the alternating Maclaurin series
//   erf(x) = (2/sqrt(pi)) sum_k (-1)^k x^(2k+1) / (k! (2k+1))
// evaluated in long double with 60 terms; trustworthy for |x| <= 2.
long double erf_taylor(long double x) {
    long double sum = 0.0L, term = x;
    for (int k = 0; k < 60; ++k) {
        sum += term / (2 * k + 1);
        term *= -x * x / (k + 1);
    }
    return 2.0L / std::sqrt(3.14159265358979323846264338327950288L) * sum;
}

} // namespace

TEST_CASE("erf: values against the Taylor oracle") {
    CHECK(numerics::erf(0.0) == 0.0);
    CHECK(numerics::erf(6.0) > 1.0 - 1e-15);
    CHECK(numerics::erf(6.0) <= 1.0);
    CHECK(numerics::erf(1.0) ==
          doctest::Approx(static_cast<double>(erf_taylor(1.0L))).epsilon(1e-14));
    for (int i = 0; i < 200; ++i) {
        const double x = testutil::uniform(11, i, -2.0, 2.0);
        CHECK(std::fabs(numerics::erf(x) - static_cast<double>(erf_taylor(x))) < 1e-14);
    }
    // cross-check against the C library over the full useful range
    for (int i = 0; i < 500; ++i) {
        const double x = testutil::uniform(12, i, -8.0, 8.0);
        CHECK(std::fabs(numerics::erf(x) - std::erf(x)) < 1e-14);
    }
}

TEST_CASE("erf: odd symmetry and monotonicity") {
    for (int i = 0; i < 1000; ++i) {
        const double x = testutil::uniform(13, 2 * i, -5.0, 5.0);
        const double y = testutil::uniform(13, 2 * i + 1, -5.0, 5.0);
        CHECK(numerics::erf(-x) == -numerics::erf(x));
        if (x < y) CHECK(numerics::erf(x) < numerics::erf(y));
        if (y < x) CHECK(numerics::erf(y) < numerics::erf(x));
    }
}

TEST_CASE("erf_antideriv: value at zero, evenness, asymptote, derivative") {
    CHECK(numerics::erf_antideriv(0.0) == doctest::Approx(0.5641895835477563).epsilon(1e-14));
    CHECK(numerics::erf_antideriv(-2.0) == numerics::erf_antideriv(2.0));
    CHECK(numerics::erf_antideriv(1.0) ==
          doctest::Approx(numerics::erf(1.0) + std::exp(-1.0) / std::sqrt(M_PI)).epsilon(1e-14));
    CHECK(std::fabs(numerics::erf_antideriv(20.0) - 20.0) < 1e-15);
    // h'(x) = erf(x) via central differences
    for (int i = 0; i < 100; ++i) {
        const double x = testutil::uniform(14, i, -4.0, 4.0);
        const double h = 1e-5;
        const double fd =
            (numerics::erf_antideriv(x + h) - numerics::erf_antideriv(x - h)) / (2 * h);
        CHECK(std::fabs(fd - numerics::erf(x)) < 1e-6);
    }
    // cross-check against quadrature of erf over [0, 1]
    const double quad =
        numerics::integrate([](double t) { return numerics::erf(t); }, 0.0, 1.0, 1e-12);
    CHECK(numerics::erf_antideriv(1.0) - numerics::erf_antideriv(0.0) ==
          doctest::Approx(quad).epsilon(1e-11));
}

TEST_CASE("sym_eig: identity and diagonal") {
    Matrix i3(3, 3);
    for (int i = 0; i < 3; ++i) i3(i, i) = 1.0;
    const auto eig = numerics::sym_eig(i3);
    for (int i = 0; i < 3; ++i) CHECK(eig.eigenvalues[i] == doctest::Approx(1.0));

    Matrix d3(3, 3);
    d3(0, 0) = 3.0;
    d3(1, 1) = 1.0;
    d3(2, 2) = 2.0;
    const auto e2 = numerics::sym_eig(d3);
    CHECK(e2.eigenvalues[0] == doctest::Approx(3.0));
    CHECK(e2.eigenvalues[1] == doctest::Approx(2.0));
    CHECK(e2.eigenvalues[2] == doctest::Approx(1.0));
}

namespace {

void check_decomposition(const Matrix& a, const numerics::EigenDecomposition& eig, double tol) {
    const std::size_t n = a.rows();
    for (std::size_t i = 1; i < n; ++i) CHECK(eig.eigenvalues[i] <= eig.eigenvalues[i - 1]);
    double worst = 0.0;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j <= i; ++j) {
            double s = 0.0;
            for (std::size_t k = 0; k < n; ++k) s += eig.u(k, i) * eig.u(k, j);
            worst = std::max(worst, std::fabs(s - (i == j ? 1.0 : 0.0)));
        }
    CHECK(worst < 1e-10);
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) {
            double s = 0.0;
            for (std::size_t k = 0; k < n; ++k)
                s += eig.u(i, k) * eig.eigenvalues[k] * eig.u(j, k);
            num += (s - a(i, j)) * (s - a(i, j));
            den += a(i, j) * a(i, j);
        }
    CHECK(std::sqrt(num / den) < tol);
}

} // namespace

TEST_CASE("sym_eig: random 50x50 reconstruction, trace and determinant") {
    const Matrix a = testutil::random_spd(50, 21);
    const auto eig = numerics::sym_eig(a);
    check_decomposition(a, eig, 1e-10);

    double trace = 0.0, sum = 0.0;
    for (std::size_t i = 0; i < 50; ++i) {
        trace += a(i, i);
        sum += eig.eigenvalues[i];
    }
    CHECK(sum == doctest::Approx(trace).epsilon(1e-10));

    // determinant on n <= 6 via an elimination oracle
    const Matrix b = testutil::random_spd(6, 22);
    const auto e6 = numerics::sym_eig(b);
    Matrix lu = b;
    double det = 1.0;
    for (std::size_t k = 0; k < 6; ++k) {
        det *= lu(k, k);
        for (std::size_t i = k + 1; i < 6; ++i) {
            const double f = lu(i, k) / lu(k, k);
            for (std::size_t j = k; j < 6; ++j) lu(i, j) -= f * lu(k, j);
        }
    }
    double prod = 1.0;
    for (double w : e6.eigenvalues) prod *= w;
    CHECK(prod == doctest::Approx(det).epsilon(1e-8));
}

TEST_CASE("sym_eig: reference and lapack backends agree") {
    const Matrix a = testutil::random_spd(120, 23); // above the lapack threshold
    setenv("ODEFIT_EIG", "reference", 1);
    const auto ref = numerics::sym_eig(a);
    unsetenv("ODEFIT_EIG");
    const auto def = numerics::sym_eig(a);
    check_decomposition(a, ref, 1e-10);
    check_decomposition(a, def, 1e-10);
    for (std::size_t i = 0; i < a.rows(); ++i)
        CHECK(ref.eigenvalues[i] == doctest::Approx(def.eigenvalues[i]).epsilon(1e-9));
}

TEST_CASE("sym_eig: rejects asymmetric input") {
    Matrix a(2, 2);
    a(0, 0) = 1.0;
    a(0, 1) = 0.5;
    a(1, 0) = 0.7;
    a(1, 1) = 1.0;
    CHECK_THROWS_AS((void)numerics::sym_eig(a), std::invalid_argument);
}

TEST_CASE("adaptive_quadrature: analytic cases and additivity") {
    const auto one = [](double) { return 1.0; };
    CHECK(numerics::integrate(one, 0.0, 2.0, 1e-12) == doctest::Approx(2.0).epsilon(1e-12));
    CHECK(numerics::integrate([](double t) { return std::cos(t); }, 0.0, M_PI / 2, 1e-12) ==
          doctest::Approx(1.0).epsilon(1e-12));
    // Gaussian bump against the erf closed form
    const double val = numerics::integrate(
        [](double s) { return std::exp(-0.5 * (s - 0.5) * (s - 0.5)); }, 0.0, 1.0, 1e-12);
    const double closed = std::sqrt(2 * M_PI) / 2.0 *
                          (numerics::erf(0.5 / std::sqrt(2.0)) + numerics::erf(0.5 / std::sqrt(2.0)));
    CHECK(val == doctest::Approx(closed).epsilon(1e-11));
    for (int i = 0; i < 20; ++i) {
        const double c = testutil::uniform(31, i, 0.1, 2.9);
        const auto f = [](double t) { return std::sin(3 * t) + t * t; };
        const double whole = numerics::integrate(f, 0.0, 3.0, 1e-10);
        const double parts =
            numerics::integrate(f, 0.0, c, 1e-10) + numerics::integrate(f, c, 3.0, 1e-10);
        CHECK(std::fabs(whole - parts) < 2e-10);
    }
    // budget exhaustion is reported, not silently accepted
    const auto spiky = [](double t) { return std::sin(1.0 / (std::fabs(t) + 1e-14)); };
    const auto r = numerics::adaptive_quadrature(spiky, 0.0, 1.0, 1e-14, 64);
    CHECK_FALSE(r.converged);
}

TEST_CASE("max_curvature_point: line, circle, rounded corner") {
    const std::size_t m = 41;
    std::vector<double> p(m), xs(m), ys(m);

    // straight line: curvature ~ 0, argmax ties to the smallest interior index
    for (std::size_t i = 0; i < m; ++i) {
        p[i] = static_cast<double>(i);
        xs[i] = 0.5 * p[i];
        ys[i] = 2.0 * xs[i];
    }
    const auto line = numerics::max_curvature_point(xs, ys, p);
    CHECK(std::fabs(line.curvature) < 1e-12);
    CHECK(line.index == 1);

    // unit circle traversed counterclockwise: interior curvature 1
    for (std::size_t i = 0; i < m; ++i) {
        p[i] = 2 * M_PI * static_cast<double>(i) / (m - 1);
        xs[i] = std::cos(p[i]);
        ys[i] = std::sin(p[i]);
    }
    const auto circ = numerics::max_curvature_point(xs, ys, p);
    CHECK(circ.curvature == doctest::Approx(1.0).epsilon(1e-2));

    // L-shaped polyline rounded at a known location
    for (std::size_t i = 0; i < m; ++i) {
        const double t = -1.0 + 2.0 * static_cast<double>(i) / (m - 1);
        p[i] = t;
        const double r = 0.05;
        xs[i] = t;
        ys[i] = 0.5 * (t + std::sqrt(t * t + r * r));
    }
    const auto corner = numerics::max_curvature_point(xs, ys, p);
    CHECK(xs[corner.index] == doctest::Approx(0.0).epsilon(0.08));

    // degenerate curve is rejected
    std::fill(xs.begin(), xs.end(), 1.0);
    std::fill(ys.begin(), ys.end(), 2.0);
    CHECK_THROWS_AS((void)numerics::max_curvature_point(xs, ys, p), std::invalid_argument);
}
