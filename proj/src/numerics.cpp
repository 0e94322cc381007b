#include "odefit/numerics.hpp"
#include "odefit/detail/scalar_math.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <cstring>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace odefit::numerics {

double erf(double x) {
    require(std::isfinite(x), "erf: x must be finite");
    return detail::erf_series(x);
}

double erf_antideriv(double x) {
    require(std::isfinite(x), "erf_antideriv: x must be finite");
    return detail::erf_antideriv_scalar(x);
}

// ---------------------------------------------------------------- sym_eig

namespace {

// Householder reduction of a symmetric matrix to tridiagonal form with
// accumulated transformations, followed by implicit-shift QL on the
// tridiagonal. Classic dense algorithm (tred2/tql2 lineage).
void tridiagonalize(Matrix& z, std::vector<double>& d, std::vector<double>& e) {
    const std::size_t n = z.rows();
    d.assign(n, 0.0);
    e.assign(n, 0.0);
    for (std::size_t i = n - 1; i >= 1; --i) {
        const std::size_t l = i - 1;
        double h = 0.0, scale = 0.0;
        if (l > 0) {
            for (std::size_t k = 0; k <= l; ++k) scale += std::fabs(z(i, k));
            if (scale == 0.0) {
                e[i] = z(i, l);
            } else {
                for (std::size_t k = 0; k <= l; ++k) {
                    z(i, k) /= scale;
                    h += z(i, k) * z(i, k);
                }
                double f = z(i, l);
                double g = f >= 0.0 ? -std::sqrt(h) : std::sqrt(h);
                e[i] = scale * g;
                h -= f * g;
                z(i, l) = f - g;
                f = 0.0;
                for (std::size_t j = 0; j <= l; ++j) {
                    z(j, i) = z(i, j) / h;
                    g = 0.0;
                    for (std::size_t k = 0; k <= j; ++k) g += z(j, k) * z(i, k);
                    for (std::size_t k = j + 1; k <= l; ++k) g += z(k, j) * z(i, k);
                    e[j] = g / h;
                    f += e[j] * z(i, j);
                }
                const double hh = f / (h + h);
                for (std::size_t j = 0; j <= l; ++j) {
                    f = z(i, j);
                    e[j] = g = e[j] - hh * f;
                    for (std::size_t k = 0; k <= j; ++k)
                        z(j, k) -= f * e[k] + g * z(i, k);
                }
            }
        } else {
            e[i] = z(i, l);
        }
        d[i] = h;
    }
    d[0] = 0.0;
    e[0] = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        if (d[i] != 0.0) {
            for (std::size_t j = 0; j < i; ++j) {
                double g = 0.0;
                for (std::size_t k = 0; k < i; ++k) g += z(i, k) * z(k, j);
                for (std::size_t k = 0; k < i; ++k) z(k, j) -= g * z(k, i);
            }
        }
        d[i] = z(i, i);
        z(i, i) = 1.0;
        for (std::size_t j = 0; j < i; ++j) z(j, i) = z(i, j) = 0.0;
    }
}

void ql_implicit(std::vector<double>& d, std::vector<double>& e, Matrix& z) {
    const std::size_t n = d.size();
    if (n == 1) return;
    for (std::size_t i = 1; i < n; ++i) e[i - 1] = e[i];
    e[n - 1] = 0.0;
    for (std::size_t l = 0; l < n; ++l) {
        int iter = 0;
        std::size_t m;
        do {
            for (m = l; m + 1 < n; ++m) {
                const double dd = std::fabs(d[m]) + std::fabs(d[m + 1]);
                if (std::fabs(e[m]) <= std::numeric_limits<double>::epsilon() * dd) break;
            }
            if (m != l) {
                if (++iter == 50) throw std::runtime_error("sym_eig: QL failed to converge");
                double g = (d[l + 1] - d[l]) / (2.0 * e[l]);
                double r = std::hypot(g, 1.0);
                g = d[m] - d[l] + e[l] / (g + (g >= 0.0 ? std::fabs(r) : -std::fabs(r)));
                double s = 1.0, c = 1.0, p = 0.0;
                bool underflow = false;
                for (std::size_t i = m; i-- > l;) {
                    double f = s * e[i];
                    const double b = c * e[i];
                    r = std::hypot(f, g);
                    e[i + 1] = r;
                    if (r == 0.0) {
                        d[i + 1] -= p;
                        e[m] = 0.0;
                        underflow = true;
                        break;
                    }
                    s = f / r;
                    c = g / r;
                    g = d[i + 1] - p;
                    r = (d[i] - g) * s + 2.0 * c * b;
                    p = s * r;
                    d[i + 1] = g + p;
                    g = c * r - b;
                    for (std::size_t k = 0; k < n; ++k) {
                        f = z(k, i + 1);
                        z(k, i + 1) = s * z(k, i) + c * f;
                        z(k, i) = c * z(k, i) - s * f;
                    }
                }
                if (underflow) continue;
                d[l] -= p;
                e[l] = g;
                e[m] = 0.0;
            }
        } while (m != l);
    }
}

EigenDecomposition sym_eig_reference(Matrix a) {
    std::vector<double> d, e;
    tridiagonalize(a, d, e);
    ql_implicit(d, e, a);
    EigenDecomposition out;
    out.eigenvalues = std::move(d);
    out.u = std::move(a);
    return out;
}

#if defined(ODEFIT_HAVE_LAPACK)
extern "C" void dsyevd_(const char* jobz, const char* uplo, const int* n, double* a,
                        const int* lda, double* w, double* work, const int* lwork,
                        int* iwork, const int* liwork, int* info);

EigenDecomposition sym_eig_lapack(const Matrix& a) {
    const int n = static_cast<int>(a.rows());
    // Column-major input; a symmetric matrix reads the same either way.
    Matrix v = a;
    std::vector<double> w(n);
    int lwork = -1, liwork = -1, info = 0;
    double wq = 0.0;
    int iq = 0;
    dsyevd_("V", "L", &n, v.data(), &n, w.data(), &wq, &lwork, &iq, &liwork, &info);
    lwork = static_cast<int>(wq);
    liwork = iq;
    std::vector<double> work(lwork);
    std::vector<int> iwork(liwork);
    dsyevd_("V", "L", &n, v.data(), &n, w.data(), work.data(), &lwork, iwork.data(),
            &liwork, &info);
    if (info != 0) throw std::runtime_error("sym_eig: dsyevd failed");
    // Column-major eigenvector columns are rows of v when read row-major.
    EigenDecomposition out;
    out.eigenvalues = std::move(w);
    out.u = Matrix(n, n);
    for (int j = 0; j < n; ++j)
        for (int i = 0; i < n; ++i) out.u(i, j) = v(j, i);
    return out;
}
#endif

void sort_descending(EigenDecomposition& eig) {
    const std::size_t n = eig.eigenvalues.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return eig.eigenvalues[a] > eig.eigenvalues[b];
    });
    std::vector<double> vals(n);
    Matrix u(n, n);
    for (std::size_t j = 0; j < n; ++j) {
        vals[j] = eig.eigenvalues[order[j]];
        for (std::size_t i = 0; i < n; ++i) u(i, j) = eig.u(i, order[j]);
    }
    eig.eigenvalues = std::move(vals);
    eig.u = std::move(u);
}

} // namespace

EigenDecomposition sym_eig(const Matrix& a) {
    require(a.rows() == a.cols() && a.rows() >= 1, "sym_eig: need a square matrix, n >= 1");
    const std::size_t n = a.rows();
    double amax = 0.0, asym = 0.0;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < i; ++j) {
            amax = std::max(amax, std::max(std::fabs(a(i, j)), std::fabs(a(j, j))));
            asym = std::max(asym, std::fabs(a(i, j) - a(j, i)));
        }
    amax = std::max(amax, std::fabs(a(n - 1, n - 1)));
    if (asym > 1e-12 * std::max(amax, 1e-300))
        throw std::invalid_argument("sym_eig: matrix is not symmetric (max |A-A^T| = " +
                                    std::to_string(asym) + ")");

    bool use_lapack = false;
#if defined(ODEFIT_HAVE_LAPACK)
    use_lapack = n >= 96;
#endif
    if (const char* force = std::getenv("ODEFIT_EIG")) {
        if (std::strcmp(force, "reference") == 0) use_lapack = false;
#if defined(ODEFIT_HAVE_LAPACK)
        else if (std::strcmp(force, "lapack") == 0) use_lapack = true;
#endif
    }

    EigenDecomposition eig;
#if defined(ODEFIT_HAVE_LAPACK)
    if (use_lapack)
        eig = sym_eig_lapack(a);
    else
#endif
        eig = sym_eig_reference(a);
    sort_descending(eig);
    return eig;
}

// ----------------------------------------------------- adaptive quadrature

namespace {

// Gauss-Kronrod 15(7) nodes/weights on [-1, 1].
constexpr double kKronrodNodes[8] = {
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144838258730,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.000000000000000000000000000000000};
constexpr double kKronrodWeights[8] = {
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714};
constexpr double kGaussWeights[4] = {
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327};

struct PanelEstimate {
    double kronrod;
    double error;
};

PanelEstimate gk15(const std::function<double(double)>& f, double a, double b) {
    const double c = 0.5 * (a + b);
    const double h = 0.5 * (b - a);
    double fk[15];
    for (int i = 0; i < 7; ++i) {
        fk[i] = f(c - h * kKronrodNodes[i]);
        fk[14 - i] = f(c + h * kKronrodNodes[i]);
    }
    fk[7] = f(c);
    double kron = kKronrodWeights[7] * fk[7];
    for (int i = 0; i < 7; ++i) kron += kKronrodWeights[i] * (fk[i] + fk[14 - i]);
    double gauss = kGaussWeights[3] * fk[7];
    for (int i = 0; i < 3; ++i) gauss += kGaussWeights[i] * (fk[2 * i + 1] + fk[13 - 2 * i]);
    kron *= h;
    gauss *= h;
    return {kron, std::fabs(kron - gauss)};
}

} // namespace

QuadratureResult adaptive_quadrature(const std::function<double(double)>& f,
                                     double a, double b, double tol, int max_panels) {
    require(tol > 0.0, "adaptive_quadrature: tol must be positive");
    require(std::isfinite(a) && std::isfinite(b), "adaptive_quadrature: bounds must be finite");
    if (a == b) return {0.0, 0.0, true, 0};
    const double sign = a < b ? 1.0 : -1.0;
    const double lo = std::min(a, b), hi = std::max(a, b);
    const double total_len = hi - lo;

    struct Interval {
        double a, b;
    };
    std::vector<Interval> work{{lo, hi}};
    double total = 0.0, total_err = 0.0;
    int panels = 0;
    bool converged = true;
    while (!work.empty()) {
        const Interval iv = work.back();
        work.pop_back();
        const PanelEstimate est = gk15(f, iv.a, iv.b);
        ++panels;
        const double local_tol = tol * (iv.b - iv.a) / total_len;
        const double mid = 0.5 * (iv.a + iv.b);
        const bool at_resolution = (mid <= iv.a || mid >= iv.b);
        if (est.error <= local_tol || at_resolution) {
            total += est.kronrod;
            total_err += est.error;
        } else if (panels >= max_panels) {
            total += est.kronrod;
            total_err += est.error;
            converged = false;
        } else {
            work.push_back({iv.a, mid});
            work.push_back({mid, iv.b});
        }
    }
    return {sign * total, total_err, converged && total_err <= tol, panels};
}

double integrate(const std::function<double(double)>& f, double a, double b, double tol) {
    const QuadratureResult r = adaptive_quadrature(f, a, b, tol);
    if (!r.converged)
        throw std::runtime_error("adaptive_quadrature: failed to reach tolerance within budget");
    return r.value;
}

// ------------------------------------------------------------- curvature

std::vector<double> curvature_profile(std::span<const double> xs,
                                      std::span<const double> ys,
                                      std::span<const double> params) {
    const std::size_t m = params.size();
    require(xs.size() == m && ys.size() == m, "curvature: xs, ys, params must have equal length");
    require(m >= 5, "curvature: need at least 5 points");
    for (std::size_t i = 1; i < m; ++i)
        require((params[i] > params[i - 1]) == (params[1] > params[0]) && params[i] != params[i - 1],
                "curvature: params must be strictly monotone");

    std::vector<double> kappa(m, std::numeric_limits<double>::quiet_NaN());
    for (std::size_t i = 1; i + 1 < m; ++i) {
        const double hm = params[i] - params[i - 1];
        const double hp = params[i + 1] - params[i];
        const auto d1 = [&](std::span<const double> f) {
            return (hm / (hp * (hm + hp))) * f[i + 1] + ((hp - hm) / (hp * hm)) * f[i] -
                   (hp / (hm * (hm + hp))) * f[i - 1];
        };
        const auto d2 = [&](std::span<const double> f) {
            return 2.0 * (f[i - 1] / (hm * (hm + hp)) - f[i] / (hm * hp) +
                          f[i + 1] / (hp * (hm + hp)));
        };
        const double xp = d1(xs), yp = d1(ys), xpp = d2(xs), ypp = d2(ys);
        const double speed = xp * xp + yp * yp;
        kappa[i] = (xp * ypp - yp * xpp) / std::pow(speed, 1.5);
    }
    return kappa;
}

CurvaturePoint max_curvature_point(std::span<const double> xs,
                                   std::span<const double> ys,
                                   std::span<const double> params) {
    bool degenerate = true;
    for (std::size_t i = 1; i < xs.size() && degenerate; ++i)
        if (xs[i] != xs[0] || ys[i] != ys[0]) degenerate = false;
    if (degenerate) throw std::invalid_argument("max_curvature_point: degenerate curve");

    const std::vector<double> kappa = curvature_profile(xs, ys, params);
    std::size_t best = 1;
    for (std::size_t i = 2; i + 1 < kappa.size(); ++i)
        if (kappa[i] > kappa[best]) best = i;
    return {best, kappa[best]};
}

} // namespace odefit::numerics
