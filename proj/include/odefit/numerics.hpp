#pragma once
// Scalar and matrix numerics shared by the fitting pipeline: error function
// and antiderivative, symmetric eigendecomposition, adaptive quadrature, and
// signed curvature of a sampled plane curve.

#include "odefit/matrix.hpp"

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

namespace odefit::numerics {

// erf(x) = (2/sqrt(pi)) int_0^x exp(-t^2) dt, absolute error well below 1e-14.
double erf(double x);

// h(x) = x*erf(x) + exp(-x^2)/sqrt(pi) with h' = erf; even, h(x)-|x| -> 0.
double erf_antideriv(double x);

// Eigenvalues sorted descending; u is orthogonal with column i paired with
// eigenvalue i.
struct EigenDecomposition {
    std::vector<double> eigenvalues;
    Matrix u;
};

// Dense symmetric eigensolver. Small problems run the built-in Householder
// tridiagonalization + implicit-shift QL reference; large ones go through
// LAPACK dsyevd when compiled in. ODEFIT_EIG=reference|lapack overrides.
EigenDecomposition sym_eig(const Matrix& a);

struct QuadratureResult {
    double value;
    double error_estimate;
    bool converged;
    int panels_used;
};

// Adaptive Gauss-Kronrod 15(7) on [a, b] to absolute tolerance tol.
QuadratureResult adaptive_quadrature(const std::function<double(double)>& f,
                                     double a, double b, double tol,
                                     int max_panels = 200000);

// Convenience wrapper that throws on non-convergence.
double integrate(const std::function<double(double)>& f, double a, double b, double tol);

struct CurvaturePoint {
    std::size_t index;
    double curvature;
};

// Signed curvature kappa = (x'y'' - y'x'') / (x'^2 + y'^2)^(3/2) of the
// sampled curve (xs, ys) with derivatives taken against params by central
// finite differences on the (possibly nonuniform) grid. Endpoints are
// excluded from the argmax; ties break to the smallest index.
CurvaturePoint max_curvature_point(std::span<const double> xs,
                                   std::span<const double> ys,
                                   std::span<const double> params);

// Per-point signed curvature on the same stencil; entries 0 and m-1 are NaN.
std::vector<double> curvature_profile(std::span<const double> xs,
                                      std::span<const double> ys,
                                      std::span<const double> params);

} // namespace odefit::numerics
