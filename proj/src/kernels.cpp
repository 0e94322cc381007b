#include "odefit/kernels.hpp"
#include "odefit/detail/scalar_math.hpp"
#include "odefit/simd.hpp"

#include <cmath>
#include <stdexcept>

namespace odefit::kernels {

namespace {

constexpr double kSqrt2Pi = 2.5066282746310005024157652848;
constexpr double kSqrtPi = 1.7724538509055160272981674833;

void validate(const KernelSpec& k) {
    require(k.length_scale > 0.0, "kernel: length_scale must be positive");
    if (k.family == Family::Matern)
        require(k.nu == 0.5 || k.nu == 1.5 || k.nu == 2.5,
                "kernel: Matern nu must be one of 1/2, 3/2, 5/2");
}

double matern_of_r(double nu, double r) {
    if (nu == 0.5) return std::exp(-r);
    if (nu == 1.5) return (1.0 + r) * std::exp(-r);
    return (1.0 + r + r * r / 3.0) * std::exp(-r);
}

// F(x) = int_0^x k(|u|) du for x >= 0, with a = sqrt(2 nu)/l; odd extension
// G(x) = sign(x) F(|x|) gives int_0^T k(s,t) ds = G(T-t) + G(t).
double matern_F(double nu, double a, double x) {
    const double e = std::exp(-a * x);
    if (nu == 0.5) return (1.0 - e) / a;
    if (nu == 1.5) return 2.0 / a - e * (2.0 / a + x);
    return 8.0 / (3.0 * a) - e * (8.0 / (3.0 * a) + 5.0 * x / 3.0 + a * x * x / 3.0);
}

// H(x) = int_0^x F(u) du for x >= 0; even extension H(|x|) yields the
// double integral H(t_i) + H(t_j) - H(t_i - t_j).
double matern_H(double nu, double a, double x) {
    const double e = std::exp(-a * x);
    if (nu == 0.5) return x / a + (e - 1.0) / (a * a);
    if (nu == 1.5) return 2.0 * x / a - 3.0 / (a * a) + e * (3.0 / (a * a) + x / a);
    return 8.0 * x / (3.0 * a) - 5.0 / (a * a) +
           e * (5.0 / (a * a) + 7.0 * x / (3.0 * a) + x * x / 3.0);
}

double matern_G(double nu, double a, double x) {
    return x >= 0.0 ? matern_F(nu, a, x) : -matern_F(nu, a, -x);
}

} // namespace

KernelSpec KernelSpec::gaussian(double length_scale) {
    KernelSpec k{Family::Gaussian, length_scale, 1.5};
    validate(k);
    return k;
}

KernelSpec KernelSpec::matern(double nu, double length_scale) {
    KernelSpec k{Family::Matern, length_scale, nu};
    validate(k);
    return k;
}

double eval(const KernelSpec& k, double s, double t) {
    validate(k);
    require(std::isfinite(s) && std::isfinite(t), "kernel eval: arguments must be finite");
    const double d = std::fabs(s - t);
    if (k.family == Family::Gaussian) {
        const double z = d / k.length_scale;
        return std::exp(-0.5 * z * z);
    }
    return matern_of_r(k.nu, std::sqrt(2.0 * k.nu) * d / k.length_scale);
}

double single_integral(const KernelSpec& k, double t_upper, double t) {
    validate(k);
    require(t_upper >= 0.0, "single_integral: t_upper must be nonnegative");
    require(std::isfinite(t), "single_integral: t must be finite");
    if (t_upper == 0.0) return 0.0;
    if (k.family == Family::Gaussian) {
        const double s = 1.0 / (std::sqrt(2.0) * k.length_scale);
        return 0.5 * kSqrt2Pi * k.length_scale *
               (detail::erf_series((t_upper - t) * s) + detail::erf_series(t * s));
    }
    const double a = std::sqrt(2.0 * k.nu) / k.length_scale;
    return matern_G(k.nu, a, t_upper - t) + matern_G(k.nu, a, t);
}

double double_integral(const KernelSpec& k, double t_i, double t_j) {
    validate(k);
    require(t_i >= 0.0 && t_j >= 0.0, "double_integral: bounds must be nonnegative");
    if (t_i == 0.0 || t_j == 0.0) return 0.0;
    if (k.family == Family::Gaussian) {
        const double l = k.length_scale;
        const double s = 1.0 / (std::sqrt(2.0) * l);
        return kSqrtPi * l * l *
               (detail::erf_antideriv_scalar(t_i * s) + detail::erf_antideriv_scalar(t_j * s) -
                detail::erf_antideriv_scalar((t_i - t_j) * s) -
                detail::erf_antideriv_scalar(0.0));
    }
    const double a = std::sqrt(2.0 * k.nu) / k.length_scale;
    return matern_H(k.nu, a, t_i) + matern_H(k.nu, a, t_j) - matern_H(k.nu, a, std::fabs(t_i - t_j));
}

namespace {

void check_times(std::span<const double> times) {
    require(!times.empty(), "times must be nonempty");
    require(times[0] > 0.0, "times must be positive");
    for (std::size_t i = 1; i < times.size(); ++i)
        require(times[i] > times[i - 1], "times must be strictly increasing");
}

} // namespace

Matrix gram_g1(const KernelSpec& k, std::span<const double> times) {
    validate(k);
    check_times(times);
    const std::size_t n = times.size();
    const auto& ops = simd::active();
    Matrix g(n, n);

    if (k.family == Family::Gaussian) {
        const double l = k.length_scale;
        const double s = 1.0 / (std::sqrt(2.0) * l);
        const double scale = kSqrtPi * l * l;
        const double h0 = detail::erf_antideriv_scalar(0.0);
        std::vector<double> ht(n), arg(n), hdiff(n);
        for (std::size_t i = 0; i < n; ++i) arg[i] = times[i] * s;
        ops.erf_antideriv_v(arg.data(), ht.data(), n);
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t j = 0; j <= i; ++j) arg[j] = (times[i] - times[j]) * s;
            ops.erf_antideriv_v(arg.data(), hdiff.data(), i + 1);
            for (std::size_t j = 0; j <= i; ++j)
                g(i, j) = scale * (ht[i] + ht[j] - hdiff[j] - h0);
        }
    } else {
        const double a = std::sqrt(2.0 * k.nu) / k.length_scale;
        std::vector<double> hti(n);
        for (std::size_t i = 0; i < n; ++i) hti[i] = matern_H(k.nu, a, times[i]);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j <= i; ++j)
                g(i, j) = hti[i] + hti[j] - matern_H(k.nu, a, times[i] - times[j]);
    }
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j) g(i, j) = g(j, i);
    return g;
}

void psi_column(const KernelSpec& k, std::span<const double> times, double t,
                std::span<double> out) {
    const std::size_t n = times.size();
    require(out.size() == n, "psi_column: output size mismatch");
    const auto& ops = simd::active();
    if (k.family == Family::Gaussian) {
        const double l = k.length_scale;
        const double s = 1.0 / (std::sqrt(2.0) * l);
        const double scale = 0.5 * kSqrt2Pi * l;
        const double erf_t = detail::erf_series(t * s);
        std::vector<double> arg(n), e(n);
        for (std::size_t j = 0; j < n; ++j) arg[j] = (times[j] - t) * s;
        ops.erf_v(arg.data(), e.data(), n);
        for (std::size_t j = 0; j < n; ++j) out[j] = scale * (e[j] + erf_t);
    } else {
        const double a = std::sqrt(2.0 * k.nu) / k.length_scale;
        const double gt = matern_G(k.nu, a, t);
        for (std::size_t j = 0; j < n; ++j) out[j] = matern_G(k.nu, a, times[j] - t) + gt;
    }
}

Matrix psi_matrix(const KernelSpec& k, std::span<const double> times,
                  std::span<const double> eval_times) {
    validate(k);
    check_times(times);
    for (double t : eval_times) require(std::isfinite(t), "psi_matrix: eval times must be finite");
    const std::size_t n = times.size(), m = eval_times.size();
    Matrix psi(n, m);
    std::vector<double> col(n);
    for (std::size_t i = 0; i < m; ++i) {
        psi_column(k, times, eval_times[i], col);
        for (std::size_t j = 0; j < n; ++j) psi(j, i) = col[j];
    }
    return psi;
}

Matrix gram_state(const KernelSpec& k, const Matrix& points) {
    validate(k);
    require(points.rows() >= 1, "gram_state: need at least one point");
    const std::size_t n = points.rows(), d = points.cols();
    const auto& ops = simd::active();
    Matrix g(n, n);
    std::vector<double> arg(n), kv(n);
    const double inv2l2 = -0.5 / (k.length_scale * k.length_scale);
    const double a = std::sqrt(2.0 * k.nu) / k.length_scale;
    for (std::size_t i = 0; i < n; ++i) {
        const double* pi = points.row(i);
        for (std::size_t j = 0; j <= i; ++j) {
            const double* pj = points.row(j);
            double d2 = 0.0;
            for (std::size_t c = 0; c < d; ++c) {
                const double diff = pi[c] - pj[c];
                d2 += diff * diff;
            }
            arg[j] = d2;
        }
        if (k.family == Family::Gaussian) {
            for (std::size_t j = 0; j <= i; ++j) arg[j] *= inv2l2;
            ops.exp_v(arg.data(), kv.data(), i + 1);
            for (std::size_t j = 0; j <= i; ++j) g(i, j) = kv[j];
        } else {
            for (std::size_t j = 0; j <= i; ++j)
                g(i, j) = matern_of_r(k.nu, a * std::sqrt(arg[j]));
        }
    }
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j) g(i, j) = g(j, i);
    return g;
}

void state_kernel_column(const KernelSpec& k, const Matrix& points,
                         std::span<const double> x, std::span<double> out) {
    const std::size_t n = points.rows(), d = points.cols();
    require(x.size() == d, "state_kernel_column: dimension mismatch");
    require(out.size() == n, "state_kernel_column: output size mismatch");
    const auto& ops = simd::active();
    std::vector<double> arg(n);
    for (std::size_t i = 0; i < n; ++i) {
        double d2 = 0.0;
        const double* pi = points.row(i);
        for (std::size_t c = 0; c < d; ++c) {
            const double diff = pi[c] - x[c];
            d2 += diff * diff;
        }
        arg[i] = d2;
    }
    if (k.family == Family::Gaussian) {
        const double inv2l2 = -0.5 / (k.length_scale * k.length_scale);
        for (std::size_t i = 0; i < n; ++i) arg[i] *= inv2l2;
        ops.exp_v(arg.data(), out.data(), n);
    } else {
        const double a = std::sqrt(2.0 * k.nu) / k.length_scale;
        for (std::size_t i = 0; i < n; ++i) out[i] = matern_of_r(k.nu, a * std::sqrt(arg[i]));
    }
}

} // namespace odefit::kernels
