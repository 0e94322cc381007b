#include "odefit/derivfit.hpp"
#include "odefit/simd.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace odefit::derivfit {

void TimeSeries::validate() const {
    require(!x0.empty(), "TimeSeries: x0 must be nonempty");
    require(!times.empty(), "TimeSeries: times must be nonempty");
    require(values.rows() == times.size() && values.cols() == x0.size(),
            "TimeSeries: values shape must be n x d");
    require(std::isfinite(t0), "TimeSeries: t0 must be finite");
    require(times[0] > t0, "TimeSeries: times[0] must be greater than t0");
    for (double v : x0) require(std::isfinite(v), "TimeSeries: x0 must be finite");
    for (std::size_t i = 0; i < times.size(); ++i) {
        require(std::isfinite(times[i]), "TimeSeries: times must be finite");
        if (i > 0) require(times[i] > times[i - 1], "TimeSeries: times must be strictly increasing");
    }
    for (std::size_t i = 0; i < values.rows(); ++i)
        for (std::size_t j = 0; j < values.cols(); ++j)
            require(std::isfinite(values(i, j)), "TimeSeries: values must be finite");
}

Matrix assemble_b(const TimeSeries& ts) {
    ts.validate();
    const std::size_t n = ts.n(), d = ts.dim();
    Matrix b(d, n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t c = 0; c < d; ++c) b(c, i) = ts.values(i, c) - ts.x0[c];
    return b;
}

std::shared_ptr<const GramEig> precompute(const kernels::KernelSpec& kernel,
                                          std::span<const double> shifted_times) {
    auto ge = std::make_shared<GramEig>();
    ge->shifted_times.assign(shifted_times.begin(), shifted_times.end());
    ge->g1 = kernels::gram_g1(kernel, ge->shifted_times);
    ge->eig = numerics::sym_eig(ge->g1);
    return ge;
}

namespace {

// B @ U, row-major: accumulate rows of U scaled by B entries.
Matrix row_times(const Matrix& b, const Matrix& u) {
    const std::size_t d = b.rows(), n = b.cols();
    const auto& ops = simd::active();
    Matrix w(d, n, 0.0);
    for (std::size_t r = 0; r < d; ++r) {
        double* out = w.row(r);
        const double* brow = b.row(r);
        for (std::size_t i = 0; i < n; ++i) ops.axpy(brow[i], u.row(i), out, n);
    }
    return w;
}

std::vector<double> clamped_eigenvalues(const numerics::EigenDecomposition& eig) {
    std::vector<double> w(eig.eigenvalues.size());
    // negative round-off eigenvalues of a provably PD Gram act as zeros
    for (std::size_t i = 0; i < w.size(); ++i) w[i] = std::max(eig.eigenvalues[i], 0.0);
    return w;
}

std::vector<double> moving_average(const std::vector<double>& v, int window) {
    if (window <= 1) return v;
    const int n = static_cast<int>(v.size());
    const int half = window / 2;
    std::vector<double> out(v.size());
    for (int i = 0; i < n; ++i) {
        const int a = std::max(0, i - half);
        const int b = std::min(n - 1, i + half);
        double s = 0.0;
        for (int j = a; j <= b; ++j) s += v[j];
        out[i] = s / static_cast<double>(b - a + 1);
    }
    return out;
}

} // namespace

Matrix coefficients(const Matrix& g1, const Matrix& b, double lambda,
                    const numerics::EigenDecomposition& eig) {
    require(lambda > 0.0, "coefficients: lambda must be positive");
    require(g1.rows() == g1.cols() && g1.rows() == b.cols(), "coefficients: shape mismatch");
    require(eig.eigenvalues.size() == g1.rows(), "coefficients: eig does not match g1");
    const std::size_t d = b.rows(), n = b.cols();
    const std::vector<double> w = clamped_eigenvalues(eig);

    Matrix scaled = row_times(b, eig.u); // d x n, columns in eigenbasis
    for (std::size_t r = 0; r < d; ++r) {
        double* row = scaled.row(r);
        for (std::size_t i = 0; i < n; ++i) row[i] /= (w[i] + lambda);
    }
    // V = scaled @ U^T: v(r, j) = dot(scaled_row, U.row(j))
    const auto& ops = simd::active();
    Matrix v(d, n);
    for (std::size_t r = 0; r < d; ++r)
        for (std::size_t j = 0; j < n; ++j) v(r, j) = ops.dot(scaled.row(r), eig.u.row(j), n);
    return v;
}

LCurveTrace lcurve_select(const Matrix& g1, const numerics::EigenDecomposition& eig,
                          const Matrix& b, const LCurveOptions& options) {
    require(options.grid_size >= 10, "lcurve_select: grid_size must be >= 10");
    const std::size_t n = g1.rows(), d = b.rows();
    require(b.cols() == n, "lcurve_select: b shape mismatch");

    double bnorm2 = 0.0;
    for (std::size_t r = 0; r < d; ++r) bnorm2 += simd::active().sumsq(b.row(r), n);
    if (bnorm2 == 0.0) throw std::invalid_argument("lcurve_select: b is identically zero");

    const std::vector<double> w = clamped_eigenvalues(eig);
    const double lam1 = w[0];
    require(lam1 > 0.0, "lcurve_select: gram matrix is numerically zero");

    // c_i = squared column norm of B U in the eigenbasis
    Matrix bu = row_times(b, eig.u);
    std::vector<double> c(n, 0.0);
    for (std::size_t r = 0; r < d; ++r) {
        const double* row = bu.row(r);
        for (std::size_t i = 0; i < n; ++i) c[i] += row[i] * row[i];
    }

    double semi_total = 0.0;
    for (std::size_t i = 0; i < n; ++i) semi_total += c[i] * w[i];
    if (semi_total <= 0.0)
        throw std::invalid_argument("lcurve_select: seminorm vanishes identically");

    double lo = std::max(w[n - 1], options.lambda_floor_factor * lam1);
    // a collapsed spectral span (n = 1, or all eigenvalues equal) leaves the
    // L-curve without geometry; widen nominally so the sweep stays valid
    if (lo >= lam1 * (1.0 - 1e-10)) lo = lam1 * 1e-3;
    const int m = options.grid_size;
    std::vector<double> lam_asc(m), logres(m), logsemi(m), loglam(m);
    const double llo = std::log(lo), lhi = std::log(lam1);
    const auto& ops = simd::active();
    for (int i = 0; i < m; ++i) {
        const double ll = llo + (lhi - llo) * static_cast<double>(i) / (m - 1);
        lam_asc[i] = std::exp(ll);
        loglam[i] = ll;
        double res_sq = 0.0, semi_sq = 0.0;
        ops.tikhonov_terms(w.data(), c.data(), n, lam_asc[i], &res_sq, &semi_sq);
        logres[i] = 0.5 * std::log(std::max(res_sq, 1e-300));
        logsemi[i] = 0.5 * std::log(std::max(semi_sq, 1e-300));
    }

    // Corner of the (log residual, log seminorm) curve: signed curvature on a
    // lightly smoothed trace. Candidates on the bottom plateau of the
    // seminorm are skipped; a corner there corresponds to the numerically
    // zero solution bend near lambda_1.
    const std::vector<double> xs = moving_average(logres, options.smooth_window);
    const std::vector<double> ys = moving_average(logsemi, options.smooth_window);
    const std::vector<double> kappa = numerics::curvature_profile(xs, ys, loglam);

    const auto [ymin_it, ymax_it] = std::minmax_element(ys.begin(), ys.end());
    const double yfloor = *ymin_it + options.seminorm_floor_frac *
                                         std::max(*ymax_it - *ymin_it, 1e-300);
    int best = -1;
    for (int i = 1; i + 1 < m; ++i) {
        if (ys[i] < yfloor) continue;
        if (best < 0 || kappa[i] > kappa[best]) best = i;
    }
    if (best < 0) {
        const numerics::CurvaturePoint p = numerics::max_curvature_point(xs, ys, loglam);
        best = static_cast<int>(p.index);
    }

    LCurveTrace trace;
    trace.lambdas.assign(lam_asc.rbegin(), lam_asc.rend());
    trace.residual_norms.resize(m);
    trace.seminorms.resize(m);
    trace.curvatures.resize(m);
    for (int i = 0; i < m; ++i) {
        trace.residual_norms[i] = std::exp(logres[m - 1 - i]);
        trace.seminorms[i] = std::exp(logsemi[m - 1 - i]);
        trace.curvatures[i] = kappa[m - 1 - i];
    }
    trace.selected_index = static_cast<std::size_t>(m - 1 - best);
    return trace;
}

TrajectoryFit fit(const TimeSeries& ts, const FitOptions& options,
                  std::shared_ptr<const GramEig> pre) {
    ts.validate();
    const std::size_t n = ts.n(), d = ts.dim();

    std::vector<double> shifted(n);
    for (std::size_t i = 0; i < n; ++i) shifted[i] = ts.times[i] - ts.t0;

    std::shared_ptr<const GramEig> ge = pre;
    if (!ge) {
        ge = precompute(options.kernel, shifted);
    } else {
        require(ge->shifted_times.size() == n, "fit: precomputed gram does not match times");
        for (std::size_t i = 0; i < n; ++i)
            require(ge->shifted_times[i] == shifted[i], "fit: precomputed gram time mismatch");
    }

    TrajectoryFit out;
    out.kernel = options.kernel;
    out.t0 = ts.t0;
    out.x0 = ts.x0;
    out.times = ts.times;
    out.gram = ge;

    const Matrix b = assemble_b(ts);
    out.lcurve = lcurve_select(ge->g1, ge->eig, b, options.lcurve);
    if (options.lambda_override) {
        require(*options.lambda_override > 0.0, "fit: lambda override must be positive");
        out.lambda_star = *options.lambda_override;
    } else if (options.lambda_at_floor) {
        out.lambda_star = out.lcurve.lambdas.back();
    } else {
        out.lambda_star = out.lcurve.selected_lambda();
    }
    out.v_lambda = coefficients(ge->g1, b, out.lambda_star, ge->eig);

    // Derivatives at the sample times, one Psi column at a time (Psi is n x n
    // and is never materialized for large fits).
    const auto& ops = simd::active();
    out.fitted_derivatives = Matrix(n, d);
    std::vector<double> col(n);
    for (std::size_t i = 0; i < n; ++i) {
        kernels::psi_column(options.kernel, ge->shifted_times, shifted[i], col);
        for (std::size_t r = 0; r < d; ++r)
            out.fitted_derivatives(i, r) = ops.dot(out.v_lambda.row(r), col.data(), n);
    }
    // Trajectory rows x0^T + (V G1) column i
    out.fitted_trajectory = Matrix(n, d);
    for (std::size_t i = 0; i < n; ++i) {
        const double* gcol = ge->g1.row(i); // row i == column i by symmetry
        for (std::size_t r = 0; r < d; ++r)
            out.fitted_trajectory(i, r) = ts.x0[r] + ops.dot(out.v_lambda.row(r), gcol, n);
    }
    return out;
}

std::vector<double> eval_derivative(const TrajectoryFit& f, double t) {
    require(std::isfinite(t), "eval_derivative: t must be finite");
    const std::size_t n = f.times.size(), d = f.x0.size();
    std::vector<double> col(n);
    kernels::psi_column(f.kernel, f.gram->shifted_times, t - f.t0, col);
    const auto& ops = simd::active();
    std::vector<double> out(d);
    for (std::size_t r = 0; r < d; ++r) out[r] = ops.dot(f.v_lambda.row(r), col.data(), n);
    return out;
}

std::pair<double, double> residual_identity_check(const TrajectoryFit& f, const Matrix& b) {
    const std::size_t n = f.times.size(), d = f.x0.size();
    require(n * d <= 400, "residual_identity_check: n*d must stay <= 400");
    require(b.rows() == d && b.cols() == n, "residual_identity_check: b shape mismatch");
    const Matrix& g1 = f.gram->g1;

    // lhs: ||(G1 (x) I_d) vec(V) - vec(B)||_2 with vec stacking columns
    std::vector<double> gv(n * d, 0.0);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j)
            for (std::size_t c = 0; c < d; ++c)
                gv[i * d + c] += g1(i, j) * f.v_lambda(c, j);
    double lhs = 0.0;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t c = 0; c < d; ++c) {
            const double r = gv[i * d + c] - b(c, i);
            lhs += r * r;
        }
    lhs = std::sqrt(lhs);

    // rhs: ||V G1 - B||_F
    double rhs = 0.0;
    const auto& ops = simd::active();
    for (std::size_t i = 0; i < n; ++i) {
        const double* gcol = g1.row(i);
        for (std::size_t c = 0; c < d; ++c) {
            const double r = ops.dot(f.v_lambda.row(c), gcol, n) - b(c, i);
            rhs += r * r;
        }
    }
    return {lhs, std::sqrt(rhs)};
}

} // namespace odefit::derivfit
