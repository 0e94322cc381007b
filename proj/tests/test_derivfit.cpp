#include <doctest.h>

#include "odefit/derivfit.hpp"
#include "odefit/numerics.hpp"
#include "odefit/systems.hpp"
#include "test_util.hpp"

#include <cmath>

using namespace odefit;
using namespace odefit::derivfit;
using kernels::KernelSpec;

namespace {

TimeSeries make_series(double t0, std::vector<double> x0, std::vector<double> times,
                       Matrix values) {
    TimeSeries ts;
    ts.t0 = t0;
    ts.x0 = std::move(x0);
    ts.times = std::move(times);
    ts.values = std::move(values);
    return ts;
}

} // namespace

TEST_CASE("assemble_b: subtraction and column norms") {
    Matrix v(2, 1);
    v(0, 0) = 3.0;
    v(1, 0) = 5.0;
    const TimeSeries ts = make_series(0.0, {2.0}, {1.0, 2.0}, v);
    const Matrix b = assemble_b(ts);
    CHECK(b(0, 0) == 1.0);
    CHECK(b(0, 1) == 3.0);

    // constant series maps to the zero matrix
    Matrix c(3, 2);
    for (int i = 0; i < 3; ++i) {
        c(i, 0) = -1.5;
        c(i, 1) = 0.25;
    }
    const TimeSeries t2 = make_series(0.0, {-1.5, 0.25}, {0.5, 1.0, 1.5}, c);
    const Matrix b2 = assemble_b(t2);
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 2; ++j) CHECK(b2(j, i) == 0.0);

    // random series: column norms recomputed from the raw inputs
    Matrix r(4, 2);
    for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 2; ++j) r(i, j) = testutil::uniform(101, i * 2 + j, -2, 2);
    const TimeSeries t3 = make_series(0.0, {0.3, -0.6}, {1, 2, 3, 4}, r);
    const Matrix b3 = assemble_b(t3);
    for (int i = 0; i < 4; ++i) {
        double want = 0.0;
        for (int j = 0; j < 2; ++j) {
            const double diff = r(i, j) - t3.x0[j];
            want += diff * diff;
        }
        double got = b3(0, i) * b3(0, i) + b3(1, i) * b3(1, i);
        CHECK(std::sqrt(got) == doctest::Approx(std::sqrt(want)).epsilon(1e-14));
    }
}

TEST_CASE("coefficients: shrinkage, damping bound, dense-solver oracle") {
    // g1 = I: V = B / (1 + lambda)
    const std::size_t n = 5;
    Matrix eye(n, n);
    for (std::size_t i = 0; i < n; ++i) eye(i, i) = 1.0;
    Matrix b(1, n);
    for (std::size_t i = 0; i < n; ++i) b(0, i) = testutil::uniform(102, i, -1, 1);
    const auto eig_i = numerics::sym_eig(eye);
    const Matrix v = coefficients(eye, b, 1.0, eig_i);
    for (std::size_t i = 0; i < n; ++i) CHECK(v(0, i) == doctest::Approx(b(0, i) / 2.0));

    // random SPD, d = 2: matches the elimination oracle
    const Matrix g = testutil::random_spd(8, 103);
    const auto eig = numerics::sym_eig(g);
    Matrix b2(2, 8);
    for (int r = 0; r < 2; ++r)
        for (int i = 0; i < 8; ++i) b2(r, i) = testutil::uniform(104, r * 8 + i, -1, 1);
    const double lambda = 0.37;
    const Matrix v2 = coefficients(g, b2, lambda, eig);
    Matrix shifted = g;
    for (int i = 0; i < 8; ++i) shifted(i, i) += lambda;
    for (int r = 0; r < 2; ++r) {
        std::vector<double> rhs(8);
        for (int i = 0; i < 8; ++i) rhs[i] = b2(r, i);
        const std::vector<double> x = testutil::dense_solve(shifted, rhs);
        for (int i = 0; i < 8; ++i) CHECK(v2(r, i) == doctest::Approx(x[i]).epsilon(1e-10));
    }

    // heavy damping: ||V||_F <= ||B||_F / lambda * (1 + 1e-6)
    const double big = 1e6 * eig.eigenvalues[0];
    const Matrix vb = coefficients(g, b2, big, eig);
    double vn = 0.0, bn = 0.0;
    for (int r = 0; r < 2; ++r)
        for (int i = 0; i < 8; ++i) {
            vn += vb(r, i) * vb(r, i);
            bn += b2(r, i) * b2(r, i);
        }
    CHECK(std::sqrt(vn) <= std::sqrt(bn) / big * (1 + 1e-6));

    CHECK_THROWS_AS((void)coefficients(g, b2, 0.0, eig), std::invalid_argument);
    // residual of the normal equations
    const Matrix vl = coefficients(g, b2, 1e-3, eig);
    double rn = 0.0;
    for (int r = 0; r < 2; ++r)
        for (int i = 0; i < 8; ++i) {
            double s = 0.0;
            for (int j = 0; j < 8; ++j) s += vl(r, j) * shifted(j, i);
            // shifted has lambda=0.37 on the diagonal; rebuild for 1e-3
            s += vl(r, i) * (1e-3 - lambda);
            rn += (s - b2(r, i)) * (s - b2(r, i));
        }
    CHECK(std::sqrt(rn) <= 1e-8 * std::sqrt(bn));
}

TEST_CASE("lcurve_select: degenerate data and sharp-corner construction") {
    const Matrix g = testutil::random_spd(6, 105);
    const auto eig = numerics::sym_eig(g);
    Matrix zero(1, 6);
    LCurveOptions opts;
    CHECK_THROWS_AS((void)lcurve_select(g, eig, zero, opts), std::invalid_argument);

    // two well-separated eigenvalue clusters with data mixing them: the
    // corner lies between the clusters (verified by construction)
    const std::size_t n = 12;
    Matrix diag(n, n);
    for (std::size_t i = 0; i < n; ++i) diag(i, i) = i < 6 ? 1e4 : 1e-2;
    const auto ed = numerics::sym_eig(diag);
    Matrix b(1, n);
    for (std::size_t i = 0; i < n; ++i) b(0, i) = 1.0;
    const LCurveTrace t = lcurve_select(diag, ed, b, opts);
    const double sel = t.selected_lambda();
    CHECK(sel < 1e4);
    CHECK(sel > 1e-2);

    // monotonicity along the stored (descending-lambda) grid
    for (std::size_t i = 1; i < t.lambdas.size(); ++i) {
        CHECK(t.lambdas[i] < t.lambdas[i - 1]);
        CHECK(t.residual_norms[i] <= t.residual_norms[i - 1] * (1 + 1e-12));
        CHECK(t.seminorms[i] >= t.seminorms[i - 1] * (1 - 1e-12));
    }
}

TEST_CASE("fit: noise-free linear data recovers the constant derivative") {
    const std::size_t n = 40;
    std::vector<double> times(n);
    for (std::size_t i = 0; i < n; ++i) times[i] = 0.05 * static_cast<double>(i + 1);
    const std::vector<double> c{1.3, -0.4};
    Matrix vals(n, 2);
    for (std::size_t i = 0; i < n; ++i)
        for (int r = 0; r < 2; ++r) vals(i, r) = (r == 0 ? 0.5 : -0.2) + c[r] * times[i];
    const TimeSeries ts = make_series(0.0, {0.5, -0.2}, times, vals);

    FitOptions fo;
    fo.kernel = KernelSpec::gaussian(0.5);
    fo.lambda_at_floor = true;
    const TrajectoryFit f = fit(ts, fo);
    const double cn = std::sqrt(c[0] * c[0] + c[1] * c[1]);
    for (std::size_t i = 0; i < n; ++i)
        for (int r = 0; r < 2; ++r)
            CHECK(std::fabs(f.fitted_derivatives(i, r) - c[r]) <= 1e-3 * cn);
}

TEST_CASE("fit: single observation runs and stays near the data") {
    Matrix v(1, 1);
    v(0, 0) = 2.0;
    const TimeSeries ts = make_series(0.0, {1.0}, {1.0}, v);
    FitOptions fo;
    fo.kernel = KernelSpec::gaussian(1.0);
    const TrajectoryFit f = fit(ts, fo);
    CHECK(f.v_lambda.cols() == 1);
    CHECK(std::fabs(f.fitted_trajectory(0, 0) - 2.0) < 0.5);
}

TEST_CASE("eval_derivative: reproduces fitted derivatives bitwise at samples") {
    const std::size_t n = 25;
    std::vector<double> times(n);
    for (std::size_t i = 0; i < n; ++i) times[i] = 0.1 * static_cast<double>(i + 1);
    Matrix vals(n, 2);
    for (std::size_t i = 0; i < n; ++i) {
        vals(i, 0) = std::sin(times[i]);
        vals(i, 1) = std::cos(2 * times[i]);
    }
    const TimeSeries ts = make_series(0.0, {0.0, 1.0}, times, vals);
    FitOptions fo;
    fo.kernel = KernelSpec::gaussian(0.4);
    const TrajectoryFit f = fit(ts, fo);
    for (std::size_t i = 0; i < n; i += 5) {
        const std::vector<double> d = eval_derivative(f, times[i]);
        CHECK(d[0] == f.fitted_derivatives(i, 0));
        CHECK(d[1] == f.fitted_derivatives(i, 1));
    }
    // all-zero coefficients give the zero function
    TrajectoryFit z = f;
    z.v_lambda = Matrix(2, n, 0.0);
    const std::vector<double> dz = eval_derivative(z, 1.234);
    CHECK(dz[0] == 0.0);
    CHECK(dz[1] == 0.0);

    // quadrature of the continuous derivative reproduces the trajectory
    for (std::size_t i : {std::size_t{3}, std::size_t{17}}) {
        for (int r = 0; r < 2; ++r) {
            const double quad = numerics::integrate(
                [&](double t) { return eval_derivative(f, t)[r]; }, 0.0, times[i], 1e-9);
            CHECK(std::fabs(f.x0[r] + quad - f.fitted_trajectory(i, r)) < 1e-7);
        }
    }
}

TEST_CASE("trajectory identity: fitted rows equal x0 + (V G1) column") {
    const std::size_t n = 15;
    std::vector<double> times(n);
    for (std::size_t i = 0; i < n; ++i) times[i] = 0.2 * static_cast<double>(i + 1);
    Matrix vals(n, 1);
    for (std::size_t i = 0; i < n; ++i) vals(i, 0) = std::exp(-times[i]);
    const TimeSeries ts = make_series(0.0, {1.0}, times, vals);
    FitOptions fo;
    fo.kernel = KernelSpec::matern(1.5, 0.8);
    const TrajectoryFit f = fit(ts, fo);
    for (std::size_t i = 0; i < n; ++i) {
        double s = 0.0;
        for (std::size_t j = 0; j < n; ++j) s += f.v_lambda(0, j) * f.gram->g1(j, i);
        CHECK(f.fitted_trajectory(i, 0) == doctest::Approx(f.x0[0] + s).epsilon(1e-12));
    }
}

TEST_CASE("representer identities on random small instances") {
    for (int rep = 0; rep < 8; ++rep) {
        const std::size_t n = 5 + static_cast<std::size_t>(testutil::uniform(111, rep, 0, 14));
        const std::size_t d = 1 + static_cast<std::size_t>(testutil::uniform(112, rep, 0, 2.999));
        std::vector<double> times(n);
        double t = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            t += testutil::uniform(113, rep * 64 + i, 0.05, 0.3);
            times[i] = t;
        }
        Matrix vals(n, d);
        std::vector<double> x0(d);
        for (std::size_t c = 0; c < d; ++c) x0[c] = testutil::uniform(114, rep * 8 + c, -1, 1);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t c = 0; c < d; ++c)
                vals(i, c) = x0[c] + testutil::uniform(115, rep * 512 + i * d + c, -1, 1);
        TimeSeries ts = make_series(0.0, x0, times, vals);
        FitOptions fo;
        fo.kernel = rep % 2 == 0 ? KernelSpec::gaussian(0.7) : KernelSpec::matern(2.5, 0.7);
        // identities hold for any positive lambda; a spread of magnitudes
        // keeps the coefficient size moderate (a floor-level lambda would
        // put the comparison in catastrophic-cancellation territory)
        auto pre = precompute(fo.kernel, times);
        fo.lambda_override = pre->eig.eigenvalues.front() * std::pow(10.0, -(rep % 5)) * 1e-1;
        const TrajectoryFit f = fit(ts, fo, pre);
        const Matrix b = assemble_b(ts);

        // residual identity via the explicit Kronecker block matrix
        const auto [lhs, rhs] = residual_identity_check(f, b);
        CHECK(lhs == doctest::Approx(rhs).epsilon(1e-10));

        // seminorm identity: v^T G v = trace(V G1 V^T) >= 0
        const std::size_t nd = n * d;
        std::vector<double> vvec(nd);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t c = 0; c < d; ++c) vvec[i * d + c] = f.v_lambda(c, i);
        double vgv = 0.0;
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j)
                for (std::size_t c = 0; c < d; ++c)
                    vgv += vvec[i * d + c] * f.gram->g1(i, j) * vvec[j * d + c];
        double tr = 0.0;
        for (std::size_t c = 0; c < d; ++c)
            for (std::size_t i = 0; i < n; ++i) {
                double s = 0.0;
                for (std::size_t j = 0; j < n; ++j) s += f.v_lambda(c, j) * f.gram->g1(j, i);
                tr += s * f.v_lambda(c, i);
            }
        CHECK(vgv >= -1e-12 * std::max(1.0, std::fabs(tr)));
        CHECK(vgv == doctest::Approx(tr).epsilon(1e-10));

        // Kronecker block consistency: per-dimension scalar fits agree
        for (std::size_t c = 0; c < d; ++c) {
            Matrix bc(1, n);
            for (std::size_t i = 0; i < n; ++i) bc(0, i) = b(c, i);
            const Matrix vc = coefficients(f.gram->g1, bc, f.lambda_star, f.gram->eig);
            for (std::size_t i = 0; i < n; ++i)
                CHECK(vc(0, i) == doctest::Approx(f.v_lambda(c, i)).epsilon(1e-10));
        }

        // local optimality of the regularized objective at the solution
        const auto objective = [&](const std::vector<double>& v) {
            double fit_term = 0.0, reg = 0.0;
            for (std::size_t i = 0; i < n; ++i)
                for (std::size_t c = 0; c < d; ++c) {
                    double gv = 0.0;
                    for (std::size_t j = 0; j < n; ++j)
                        gv += f.gram->g1(i, j) * v[j * d + c];
                    fit_term += (gv - b(c, i)) * (gv - b(c, i));
                }
            for (std::size_t i = 0; i < n; ++i)
                for (std::size_t j = 0; j < n; ++j)
                    for (std::size_t c = 0; c < d; ++c)
                        reg += v[i * d + c] * f.gram->g1(i, j) * v[j * d + c];
            return fit_term + f.lambda_star * reg;
        };
        const double at_solution = objective(vvec);
        for (int p = 0; p < 20; ++p) {
            std::vector<double> w(nd);
            double norm = 0.0;
            for (std::size_t i = 0; i < nd; ++i) {
                w[i] = testutil::uniform(116, rep * 4096 + p * 128 + i, -1, 1);
                norm += w[i] * w[i];
            }
            norm = std::sqrt(norm);
            std::vector<double> v2 = vvec;
            for (std::size_t i = 0; i < nd; ++i) v2[i] += 1e-3 * w[i] / norm;
            CHECK(objective(v2) > at_solution);
        }
    }
}

TEST_CASE("residual_identity_check: guards and trivial cases") {
    Matrix v(3, 1);
    v(0, 0) = 1.0;
    v(1, 0) = 2.0;
    v(2, 0) = 3.0;
    const TimeSeries ts = make_series(0.0, {0.5}, {1.0, 2.0, 3.0}, v);
    FitOptions fo;
    fo.kernel = KernelSpec::gaussian(1.0);
    TrajectoryFit f = fit(ts, fo);
    const Matrix b = assemble_b(ts);

    // V = 0: both sides equal ||B||_F
    f.v_lambda = Matrix(1, 3, 0.0);
    const auto [lhs, rhs] = residual_identity_check(f, b);
    double bf = 0.0;
    for (int i = 0; i < 3; ++i) bf += b(0, i) * b(0, i);
    CHECK(lhs == doctest::Approx(std::sqrt(bf)));
    CHECK(rhs == doctest::Approx(std::sqrt(bf)));
}

TEST_CASE("fit: lorenz63 segment with shared precomputed gram") {
    const systems::OdeSystem sys = systems::make_system("lorenz63");
    const std::size_t n = 150;
    std::vector<double> times(n);
    for (std::size_t i = 0; i < n; ++i) times[i] = 3.0 * static_cast<double>(i + 1) / n;
    const Matrix truth = systems::integrate_exact(sys, sys.default_x0, times, 1e-11);
    const Matrix noisy = systems::add_noise(truth, 0.05, 3);

    TimeSeries ts;
    ts.t0 = 0.0;
    ts.x0 = sys.default_x0;
    ts.times = times;
    ts.values = noisy;

    FitOptions fo;
    fo.kernel = KernelSpec::gaussian(0.05);
    auto pre = precompute(fo.kernel, times);
    const TrajectoryFit f1 = fit(ts, fo, pre);
    const TrajectoryFit f2 = fit(ts, fo);
    CHECK(f1.lambda_star == f2.lambda_star);
    // the trajectory fit tracks the truth well below the noise level
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < n; ++i)
        for (int c = 0; c < 3; ++c) {
            num += (f1.fitted_trajectory(i, c) - truth(i, c)) *
                   (f1.fitted_trajectory(i, c) - truth(i, c));
            den += truth(i, c) * truth(i, c);
        }
    CHECK(std::sqrt(num / den) < 0.02);
}
