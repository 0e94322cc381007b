#pragma once
// Simultaneous derivative/trajectory fitting from noisy time series by
// Tikhonov regularization over the integrated-kernel basis, with the
// regularization weight picked at the L-curve corner.

#include "odefit/kernels.hpp"
#include "odefit/matrix.hpp"
#include "odefit/numerics.hpp"

#include <memory>
#include <optional>
#include <span>
#include <vector>

namespace odefit::derivfit {

struct TimeSeries {
    double t0 = 0.0;                 // time of the exact initial value
    std::vector<double> x0;          // initial value, length d
    std::vector<double> times;       // strictly increasing, times[0] > t0
    Matrix values;                   // n x d observations

    std::size_t n() const { return times.size(); }
    std::size_t dim() const { return x0.size(); }
    void validate() const;
};

struct LCurveTrace {
    std::vector<double> lambdas;        // descending grid
    std::vector<double> residual_norms; // ||V G1 - B||_F per lambda
    std::vector<double> seminorms;      // sqrt(trace(V G1 V^T)) per lambda
    std::vector<double> curvatures;     // per grid point; NaN at the two ends
    std::size_t selected_index = 0;

    double selected_lambda() const { return lambdas[selected_index]; }
};

struct LCurveOptions {
    int grid_size = 200;
    double lambda_floor_factor = 1e-14; // grid floor: max(lambda_n, factor*lambda_1)
    int smooth_window = 9;              // moving-average window on log res / log semi
    double seminorm_floor_frac = 0.10;  // corner candidates must sit above the
                                        // bottom plateau of the seminorm by this
                                        // fraction of its log-range
};

struct FitOptions {
    kernels::KernelSpec kernel = kernels::KernelSpec::gaussian(1.0);
    LCurveOptions lcurve;
    // lambda_override: skip selection and use the given value; lambda_at_floor
    // pins lambda to the bottom of the grid (noise-free sanity runs).
    std::optional<double> lambda_override;
    bool lambda_at_floor = false;
};

// Precomputed Gram matrix + eigendecomposition for one (kernel, times) pair;
// shared across noise realizations of the same sampling design.
struct GramEig {
    std::vector<double> shifted_times;
    Matrix g1;
    numerics::EigenDecomposition eig;
};

std::shared_ptr<const GramEig> precompute(const kernels::KernelSpec& kernel,
                                          std::span<const double> shifted_times);

struct TrajectoryFit {
    kernels::KernelSpec kernel;
    double t0 = 0.0;
    std::vector<double> x0;
    std::vector<double> times;           // original (unshifted) sample times
    double lambda_star = 0.0;
    Matrix v_lambda;                     // d x n coefficients
    std::shared_ptr<const GramEig> gram; // retains G1
    Matrix fitted_derivatives;           // n x d
    Matrix fitted_trajectory;            // n x d
    LCurveTrace lcurve;
};

// B with column i = y_i - x0 (d x n).
Matrix assemble_b(const TimeSeries& ts);

// V = B U (Lambda + lambda I)^-1 U^T for the given eigendecomposition.
Matrix coefficients(const Matrix& g1, const Matrix& b, double lambda,
                    const numerics::EigenDecomposition& eig);

// L-curve sweep over the spectral range of g1. Throws on all-zero b and on a
// seminorm that vanishes identically.
LCurveTrace lcurve_select(const Matrix& g1, const numerics::EigenDecomposition& eig,
                          const Matrix& b, const LCurveOptions& options);

TrajectoryFit fit(const TimeSeries& ts, const FitOptions& options,
                  std::shared_ptr<const GramEig> pre = nullptr);

// Continuous fitted derivative at time t (original time axis).
std::vector<double> eval_derivative(const TrajectoryFit& f, double t);

// Test-only: both sides of the vec/Frobenius residual identity via the
// explicit Kronecker block matrix; n*d must stay <= 400.
std::pair<double, double> residual_identity_check(const TrajectoryFit& f, const Matrix& b);

} // namespace odefit::derivfit
