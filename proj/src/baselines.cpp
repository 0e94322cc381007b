#include "odefit/baselines.hpp"
#include "odefit/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <stdexcept>

namespace odefit::baselines {

Matrix finite_difference(std::span<const double> times, const Matrix& values) {
    const std::size_t n = times.size(), d = values.cols();
    require(n >= 2, "finite_difference: need at least two samples");
    require(values.rows() == n, "finite_difference: shape mismatch");
    Matrix out(n, d);
    for (std::size_t c = 0; c < d; ++c) {
        out(0, c) = (values(1, c) - values(0, c)) / (times[1] - times[0]);
        out(n - 1, c) = (values(n - 1, c) - values(n - 2, c)) / (times[n - 1] - times[n - 2]);
    }
    for (std::size_t i = 1; i + 1 < n; ++i) {
        const double span = times[i + 1] - times[i - 1];
        for (std::size_t c = 0; c < d; ++c)
            out(i, c) = (values(i + 1, c) - values(i - 1, c)) / span;
    }
    return out;
}

// ------------------------------------------------------------------- TV

namespace {

// Symmetric pentadiagonal Cholesky (bandwidth 2), in-place on band storage:
// diag[i], sub1[i] = M(i+1,i), sub2[i] = M(i+2,i).
void pentadiagonal_solve(std::vector<double>& diag, std::vector<double>& sub1,
                         std::vector<double>& sub2, std::vector<double>& rhs) {
    const std::size_t n = diag.size();
    const double floor_pivot = 1e-13 * (*std::max_element(diag.begin(), diag.end()));
    for (std::size_t j = 0; j < n; ++j) {
        double piv = diag[j];
        if (j >= 1) piv -= sub1[j - 1] * sub1[j - 1] * diag[j - 1];
        if (j >= 2) piv -= sub2[j - 2] * sub2[j - 2] * diag[j - 2];
        if (piv < floor_pivot) piv = floor_pivot; // round-off guard
        diag[j] = piv;
        if (j + 1 < n) {
            double v = sub1[j] - (j >= 1 ? sub2[j - 1] * sub1[j - 1] * diag[j - 1] : 0.0);
            sub1[j] = v / piv;
        }
        if (j + 2 < n) sub2[j] = sub2[j] / piv;
    }
    // forward substitution (unit lower triangular with bands sub1, sub2)
    for (std::size_t i = 0; i < n; ++i) {
        double v = rhs[i];
        if (i >= 1) v -= sub1[i - 1] * rhs[i - 1];
        if (i >= 2) v -= sub2[i - 2] * rhs[i - 2];
        rhs[i] = v;
    }
    for (std::size_t i = 0; i < n; ++i) rhs[i] /= diag[i];
    for (std::size_t i = n; i-- > 0;) {
        double v = rhs[i];
        if (i + 1 < n) v -= sub1[i] * rhs[i + 1];
        if (i + 2 < n) v -= sub2[i] * rhs[i + 2];
        rhs[i] = v;
    }
}

} // namespace

TvResult tv_derivative(std::span<const double> times, std::span<const double> y,
                       double alpha, int max_iters, double eps) {
    const std::size_t n = times.size();
    require(n >= 3, "tv_derivative: need at least three samples");
    require(y.size() == n, "tv_derivative: shape mismatch");
    require(alpha > 0.0 && eps > 0.0, "tv_derivative: alpha and eps must be positive");
    const double h = times[1] - times[0];
    require(h > 0.0, "tv_derivative: times must increase");
    for (std::size_t i = 1; i + 1 < n; ++i)
        require(std::fabs((times[i + 1] - times[i]) - h) <= 1e-9 * std::max(1.0, std::fabs(h)),
                "tv_derivative: grid must be uniform");

    // objective pieces
    const auto apply_A = [&](const std::vector<double>& u, std::vector<double>& au) {
        au[0] = 0.0;
        for (std::size_t i = 1; i < n; ++i) au[i] = au[i - 1] + h * u[i - 1];
    };
    const auto objective = [&](const std::vector<double>& u) {
        std::vector<double> au(n);
        apply_A(u, au);
        double fid = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double r = au[i] - y[i];
            fid += r * r;
        }
        double tv = 0.0;
        for (std::size_t i = 0; i + 1 < n; ++i) {
            const double du = (u[i + 1] - u[i]) / h;
            tv += std::sqrt(du * du + eps * eps);
        }
        return 0.5 * h * fid + alpha * h * tv;
    };

    // rhs of the normal equations: A^T y = h * (suffix sums of y shifted)
    std::vector<double> aty(n, 0.0);
    {
        double acc = 0.0;
        for (std::size_t i = n; i-- > 1;) {
            acc += y[i];
            aty[i - 1] = h * acc;
        }
    }
    // change of variables u = E z (E lower bidiagonal difference matrix):
    // E^T (A^T A + alpha D^T W D) E = h^2 Itilde + alpha (DE)^T W (DE),
    // D E tridiagonal, so the transformed system is pentadiagonal SPD.
    std::vector<double> rhs_base(n);
    for (std::size_t i = 0; i < n; ++i)
        rhs_base[i] = aty[i] - (i + 1 < n ? aty[i + 1] : 0.0);

    std::vector<double> u(n, 0.0);
    for (std::size_t i = 0; i + 1 < n; ++i) u[i] = (y[i + 1] - y[i]) / h;
    if (n >= 2) u[n - 1] = u[n - 2];

    TvResult result;
    result.objective_trace.push_back(objective(u));
    std::vector<double> wdiag(n - 1), diag(n), sub1(n - 1), sub2(n - 2), rhs(n), z(n);
    bool reached_tol = false;
    int it = 0;
    for (; it < max_iters; ++it) {
        for (std::size_t i = 0; i + 1 < n; ++i) {
            const double du = (u[i + 1] - u[i]) / h;
            wdiag[i] = 1.0 / std::sqrt(du * du + eps * eps);
        }
        // rows of DE: (DE z)_i = (z_{i+1} - 2 z_i + z_{i-1}) / h, with the
        // i = 0 row reading (z_1 - 2 z_0) / h.
        std::fill(diag.begin(), diag.end(), 0.0);
        std::fill(sub1.begin(), sub1.end(), 0.0);
        std::fill(sub2.begin(), sub2.end(), 0.0);
        for (std::size_t i = 0; i < n; ++i) diag[i] = (i + 1 < n) ? h * h : 0.0;
        const double inv_h2 = 1.0 / (h * h);
        for (std::size_t r = 0; r + 1 < n; ++r) {
            const double w = alpha * wdiag[r] * inv_h2;
            // stencil coefficients on (z_{r-1}, z_r, z_{r+1})
            const double cm = (r >= 1) ? 1.0 : 0.0;
            const double c0 = -2.0;
            const double cp = 1.0;
            if (r >= 1) {
                diag[r - 1] += w * cm * cm;
                sub1[r - 1] += w * cm * c0;
                sub2[r - 1] += w * cm * cp;
            }
            diag[r] += w * c0 * c0;
            sub1[r] += w * c0 * cp;
            diag[r + 1] += w * cp * cp;
        }
        rhs = rhs_base;
        pentadiagonal_solve(diag, sub1, sub2, rhs);
        z = rhs;
        // u = E z
        std::vector<double> unew(n);
        unew[0] = z[0];
        for (std::size_t i = 1; i < n; ++i) unew[i] = z[i] - z[i - 1];

        double dn = 0.0, un = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double dd = unew[i] - u[i];
            dn += dd * dd;
            un += unew[i] * unew[i];
        }
        u = std::move(unew);
        result.objective_trace.push_back(objective(u));
        if (std::sqrt(dn) <= 1e-6 * std::sqrt(std::max(un, 1e-300))) {
            ++it;
            reached_tol = true;
            break;
        }
    }
    result.iterations_used = it;
    result.converged = reached_tol;
    result.derivative = std::move(u); // non-converged iterate is still returned
    return result;
}

// ----------------------------------------------------------------- SINDy

namespace {

void enumerate_grlex(int d, int degree, std::vector<std::vector<int>>& out) {
    std::vector<int> current(d, 0);
    // all multi-indices of total degree exactly `deg`, lexicographic with
    // earlier variables taking the highest powers first
    const std::function<void(int, int)> rec = [&](int pos, int remaining) {
        if (pos == d - 1) {
            current[pos] = remaining;
            out.push_back(current);
            return;
        }
        for (int k = remaining; k >= 0; --k) {
            current[pos] = k;
            rec(pos + 1, remaining - k);
        }
    };
    for (int deg = 0; deg <= degree; ++deg) rec(0, deg);
}

std::string monomial_name(const std::vector<int>& e) {
    std::string s;
    for (std::size_t i = 0; i < e.size(); ++i) {
        if (e[i] == 0) continue;
        if (!s.empty()) s += "*";
        s += "x" + std::to_string(i + 1);
        if (e[i] > 1) s += "^" + std::to_string(e[i]);
    }
    return s.empty() ? "1" : s;
}

// Householder QR least squares on the active columns; returns false when the
// active block is numerically rank deficient (solution via pinv fallback).
bool qr_least_squares(const Matrix& theta, const std::vector<std::size_t>& active,
                      std::span<const double> rhs, std::vector<double>& coef) {
    const std::size_t m = theta.rows(), k = active.size();
    Matrix a(m, k);
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < k; ++j) a(i, j) = theta(i, active[j]);
    std::vector<double> b(rhs.begin(), rhs.end());

    std::vector<double> rdiag(k);
    bool rank_ok = true;
    double max_diag = 0.0;
    for (std::size_t j = 0; j < k; ++j) {
        double norm2 = 0.0;
        for (std::size_t i = j; i < m; ++i) norm2 += a(i, j) * a(i, j);
        double alpha = std::sqrt(norm2);
        if (a(j, j) > 0) alpha = -alpha;
        rdiag[j] = alpha;
        max_diag = std::max(max_diag, std::fabs(alpha));
        if (std::fabs(alpha) <= 1e-12 * std::max(max_diag, 1.0)) {
            rank_ok = false;
            continue;
        }
        const double vjj = a(j, j) - alpha;
        a(j, j) = vjj;
        // v^T v = -2 alpha vjj, so H y = y + v (v^T y) / (alpha vjj)
        const double beta = 1.0 / (alpha * vjj);
        for (std::size_t col = j + 1; col < k; ++col) {
            double s = 0.0;
            for (std::size_t i = j; i < m; ++i) s += a(i, j) * a(i, col);
            s *= beta;
            for (std::size_t i = j; i < m; ++i) a(i, col) += s * a(i, j);
        }
        double s = 0.0;
        for (std::size_t i = j; i < m; ++i) s += a(i, j) * b[i];
        s *= beta;
        for (std::size_t i = j; i < m; ++i) b[i] += s * a(i, j);
    }
    coef.assign(k, 0.0);
    if (!rank_ok) return false;
    for (std::size_t j = k; j-- > 0;) {
        double s = b[j];
        for (std::size_t col = j + 1; col < k; ++col) s -= a(j, col) * coef[col];
        coef[j] = s / rdiag[j];
    }
    return true;
}

// Minimum-norm solution through the eigendecomposition of the (small) normal
// matrix; used only when QR flags rank deficiency.
void pinv_least_squares(const Matrix& theta, const std::vector<std::size_t>& active,
                        std::span<const double> rhs, std::vector<double>& coef) {
    const std::size_t m = theta.rows(), k = active.size();
    Matrix ntn(k, k);
    std::vector<double> ntb(k, 0.0);
    for (std::size_t a = 0; a < k; ++a) {
        for (std::size_t b = 0; b <= a; ++b) {
            double s = 0.0;
            for (std::size_t i = 0; i < m; ++i) s += theta(i, active[a]) * theta(i, active[b]);
            ntn(a, b) = ntn(b, a) = s;
        }
        double s = 0.0;
        for (std::size_t i = 0; i < m; ++i) s += theta(i, active[a]) * rhs[i];
        ntb[a] = s;
    }
    const numerics::EigenDecomposition eig = numerics::sym_eig(ntn);
    const double cutoff = 1e-12 * std::max(eig.eigenvalues[0], 0.0);
    coef.assign(k, 0.0);
    for (std::size_t j = 0; j < k; ++j) {
        if (eig.eigenvalues[j] <= cutoff) continue;
        double proj = 0.0;
        for (std::size_t i = 0; i < k; ++i) proj += eig.u(i, j) * ntb[i];
        proj /= eig.eigenvalues[j];
        for (std::size_t i = 0; i < k; ++i) coef[i] += proj * eig.u(i, j);
    }
}

} // namespace

PolyLibrary poly_library(const Matrix& states, int degree) {
    require(degree >= 0, "poly_library: degree must be nonnegative");
    require(states.rows() >= 1, "poly_library: need at least one state");
    const std::size_t n = states.rows();
    const int d = static_cast<int>(states.cols());
    PolyLibrary lib;
    enumerate_grlex(d, degree, lib.exponents);
    const std::size_t big_j = lib.exponents.size();
    lib.theta = Matrix(n, big_j);
    lib.names.reserve(big_j);
    for (const auto& e : lib.exponents) lib.names.push_back(monomial_name(e));
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < big_j; ++j) {
            double v = 1.0;
            for (int c = 0; c < d; ++c)
                for (int p = 0; p < lib.exponents[j][c]; ++p) v *= states(i, c);
            lib.theta(i, j) = v;
        }
    return lib;
}

SindyResult stls(const PolyLibrary& library, const Matrix& xdot, double threshold,
                 int max_iters) {
    const Matrix& theta = library.theta;
    const std::size_t n = theta.rows(), big_j = theta.cols(), d = xdot.cols();
    require(xdot.rows() == n, "stls: xdot row count mismatch");
    require(threshold > 0.0, "stls: threshold must be positive");
    if (n < big_j)
        std::cerr << "stls: warning: fewer samples (" << n << ") than dictionary columns ("
                  << big_j << ")\n";

    SindyResult result;
    result.dictionary_exponents = library.exponents;
    result.dictionary_names = library.names;
    result.threshold = threshold;
    result.coefficients = Matrix(big_j, d, 0.0);

    std::vector<double> rhs(n), coef;
    int worst_iters = 0;
    for (std::size_t c = 0; c < d; ++c) {
        for (std::size_t i = 0; i < n; ++i) rhs[i] = xdot(i, c);
        std::vector<std::size_t> active(big_j);
        for (std::size_t j = 0; j < big_j; ++j) active[j] = j;

        int iters = 0;
        while (true) {
            ++iters;
            if (!qr_least_squares(theta, active, rhs, coef)) {
                result.rank_deficient = true;
                pinv_least_squares(theta, active, rhs, coef);
            }
            std::vector<std::size_t> survivors;
            for (std::size_t j = 0; j < active.size(); ++j)
                if (std::fabs(coef[j]) >= threshold) survivors.push_back(active[j]);
            const bool stable = survivors.size() == active.size();
            if (stable || survivors.empty() || iters >= max_iters) {
                if (stable) {
                    for (std::size_t j = 0; j < active.size(); ++j)
                        result.coefficients(active[j], c) = coef[j];
                } else if (!survivors.empty() && iters >= max_iters) {
                    // budget hit mid-shrink: resolve once on the survivors
                    active = survivors;
                    if (!qr_least_squares(theta, active, rhs, coef)) {
                        result.rank_deficient = true;
                        pinv_least_squares(theta, active, rhs, coef);
                    }
                    for (std::size_t j = 0; j < active.size(); ++j)
                        if (std::fabs(coef[j]) >= threshold)
                            result.coefficients(active[j], c) = coef[j];
                }
                break;
            }
            active = std::move(survivors);
        }
        worst_iters = std::max(worst_iters, iters);
    }
    result.iterations_used = worst_iters;
    return result;
}

} // namespace odefit::baselines
