#include <doctest.h>

#include "odefit/baselines.hpp"
#include "test_util.hpp"

#include <cmath>

using namespace odefit;
using namespace odefit::baselines;

TEST_CASE("finite_difference: exact for affine data, quadratics at interior") {
    const std::size_t n = 21;
    std::vector<double> times(n);
    Matrix lin(n, 1), quad(n, 1);
    for (std::size_t i = 0; i < n; ++i) {
        times[i] = 0.1 * static_cast<double>(i);
        lin(i, 0) = 2.0 * times[i] - 0.7;
        quad(i, 0) = times[i] * times[i];
    }
    const Matrix dl = finite_difference(times, lin);
    for (std::size_t i = 0; i < n; ++i) CHECK(dl(i, 0) == doctest::Approx(2.0).epsilon(1e-12));
    const Matrix dq = finite_difference(times, quad);
    for (std::size_t i = 1; i + 1 < n; ++i)
        CHECK(dq(i, 0) == doctest::Approx(2.0 * times[i]).epsilon(1e-12));

    // nonuniform central differences at interior points
    std::vector<double> nut{0.0, 0.1, 0.35, 0.5, 1.0};
    Matrix nl(5, 1);
    for (int i = 0; i < 5; ++i) nl(i, 0) = 3.0 * nut[i];
    const Matrix dn = finite_difference(nut, nl);
    for (int i = 0; i < 5; ++i) CHECK(dn(i, 0) == doctest::Approx(3.0).epsilon(1e-12));

    std::vector<double> single{0.0};
    Matrix sv(1, 1);
    CHECK_THROWS_AS((void)finite_difference(single, sv), std::invalid_argument);
}

TEST_CASE("tv_derivative: constant slope recovered at small alpha") {
    const std::size_t n = 101;
    const double h = 0.01, c = 1.7;
    std::vector<double> times(n), g(n);
    for (std::size_t i = 0; i < n; ++i) {
        times[i] = h * static_cast<double>(i);
        g[i] = c * times[i];
    }
    const TvResult r = tv_derivative(times, g, 1e-8);
    CHECK(r.converged);
    for (std::size_t i = 0; i + 1 < n; ++i) CHECK(std::fabs(r.derivative[i] - c) < 1e-3);
}

TEST_CASE("tv_derivative: large alpha flattens the estimate") {
    const std::size_t n = 101;
    const double h = 0.01;
    std::vector<double> times(n), g(n);
    for (std::size_t i = 0; i < n; ++i) {
        times[i] = h * static_cast<double>(i);
        g[i] = std::sin(6.0 * times[i]);
    }
    const auto variance = [&](const std::vector<double>& u) {
        double mean = 0.0;
        for (double v : u) mean += v;
        mean /= static_cast<double>(u.size());
        double var = 0.0;
        for (double v : u) var += (v - mean) * (v - mean);
        return var / static_cast<double>(u.size());
    };
    const TvResult tiny = tv_derivative(times, g, 1e-10);
    const TvResult huge = tv_derivative(times, g, 1e3);
    CHECK(variance(huge.derivative) <= 1e-6 * std::max(variance(tiny.derivative), 1e-30));
}

TEST_CASE("tv_derivative: objective decreases along the iteration") {
    const std::size_t n = 80;
    const double h = 0.02;
    std::vector<double> times(n), g(n);
    for (std::size_t i = 0; i < n; ++i) {
        times[i] = h * static_cast<double>(i);
        g[i] = std::fabs(times[i] - 0.8) - 0.8 + 0.05 * std::sin(40 * times[i]);
    }
    const TvResult r = tv_derivative(times, g, 1e-3);
    REQUIRE(r.objective_trace.size() >= 2);
    for (std::size_t i = 1; i < r.objective_trace.size(); ++i)
        CHECK(r.objective_trace[i] <=
              r.objective_trace[i - 1] * (1 + 1e-10) + 1e-14);
}

TEST_CASE("tv_derivative: rejects nonuniform grids") {
    std::vector<double> times{0.0, 0.1, 0.25, 0.3};
    std::vector<double> g{0.0, 0.1, 0.2, 0.3};
    CHECK_THROWS_AS((void)tv_derivative(times, g, 1e-3), std::invalid_argument);
}

TEST_CASE("poly_library: counts, ordering, evaluation at a unit vector") {
    Matrix pts(1, 2);
    pts(0, 0) = 0.0;
    pts(0, 1) = 0.0;
    const PolyLibrary l1 = poly_library(pts, 1);
    CHECK(l1.theta.cols() == 3); // 1, x1, x2
    CHECK(l1.names[0] == "1");
    CHECK(l1.names[1] == "x1");
    CHECK(l1.names[2] == "x2");

    const PolyLibrary l2 = poly_library(pts, 2);
    CHECK(l2.theta.cols() == 6);

    Matrix e1(1, 3);
    e1(0, 0) = 1.0;
    const PolyLibrary l3 = poly_library(e1, 2);
    REQUIRE(l3.theta.cols() == 10);
    const double expect[10] = {1, 1, 0, 0, 1, 0, 0, 0, 0, 0};
    for (int j = 0; j < 10; ++j) CHECK(l3.theta(0, j) == expect[j]);

    // column count C(d + p, p) across a few shapes
    for (int d = 1; d <= 5; ++d)
        for (int p = 0; p <= 3; ++p) {
            Matrix z(1, d);
            const PolyLibrary lib = poly_library(z, p);
            // binomial(d + p, p)
            double binom = 1.0;
            for (int i = 1; i <= p; ++i) binom = binom * (d + i) / i;
            CHECK(lib.theta.cols() == static_cast<std::size_t>(std::lround(binom)));
        }
}

TEST_CASE("stls: plant-and-recover, all-below-threshold, support shrinks") {
    // plant a sparse quadratic field on lorenz63-like states
    const std::size_t n = 400;
    Matrix states(n, 3);
    for (std::size_t i = 0; i < n; ++i)
        for (int c = 0; c < 3; ++c) states(i, c) = testutil::uniform(121, i * 3 + c, -15, 15);
    const PolyLibrary lib = poly_library(states, 2);
    const std::size_t big_j = lib.theta.cols();

    Matrix w0(big_j, 3, 0.0);
    const auto idx = [&](std::initializer_list<int> e) {
        const std::vector<int> key(e);
        for (std::size_t j = 0; j < lib.exponents.size(); ++j)
            if (lib.exponents[j] == key) return j;
        REQUIRE(false);
        return std::size_t{0};
    };
    w0(idx({1, 0, 0}), 0) = -10.0;
    w0(idx({0, 1, 0}), 0) = 10.0;
    w0(idx({1, 0, 0}), 1) = 28.0;
    w0(idx({0, 1, 0}), 1) = -1.0;
    w0(idx({1, 0, 1}), 1) = -1.0;
    w0(idx({1, 1, 0}), 2) = 1.0;
    w0(idx({0, 0, 1}), 2) = -8.0 / 3.0;

    Matrix xdot(n, 3, 0.0);
    for (std::size_t i = 0; i < n; ++i)
        for (int c = 0; c < 3; ++c) {
            double s = 0.0;
            for (std::size_t j = 0; j < big_j; ++j) s += lib.theta(i, j) * w0(j, c);
            xdot(i, c) = s;
        }

    const SindyResult r = stls(lib, xdot, 0.5);
    for (std::size_t j = 0; j < big_j; ++j)
        for (int c = 0; c < 3; ++c) CHECK(std::fabs(r.coefficients(j, c) - w0(j, c)) < 1e-8);

    // retained magnitudes respect the threshold
    for (std::size_t j = 0; j < big_j; ++j)
        for (int c = 0; c < 3; ++c)
            if (r.coefficients(j, c) != 0.0) CHECK(std::fabs(r.coefficients(j, c)) >= 0.5);

    // threshold above every coefficient wipes the solution
    const SindyResult onlyzero = stls(lib, xdot, 100.0);
    for (std::size_t j = 0; j < big_j; ++j)
        for (int c = 0; c < 3; ++c) CHECK(onlyzero.coefficients(j, c) == 0.0);
}
