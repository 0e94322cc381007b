#pragma once
// Comparator methods: finite differences, TV-regularized differentiation,
// and SINDy (polynomial dictionary + sequentially-thresholded least squares).

#include "odefit/matrix.hpp"

#include <span>
#include <string>
#include <vector>

namespace odefit::baselines {

// Central differences at interior points (exact for nonuniform grids),
// first-order one-sided at the two ends.
Matrix finite_difference(std::span<const double> times, const Matrix& values);

struct TvResult {
    std::vector<double> derivative;
    int iterations_used = 0;
    bool converged = true;
    std::vector<double> objective_trace; // decreases along the iteration
};

// TV-regularized derivative of one scalar channel sampled on a uniform grid
// (including the baseline point: y[0] is expected to be 0 after the caller
// subtracts the initial value). Lagged-diffusivity iteration on
//   (h/2)*||A u - y||^2 + alpha*h*sum sqrt((Du)_i^2 + eps^2),
// A = left-rectangle cumulative quadrature, D = forward differences. Each
// inner solve runs in O(n) through a change of variables that makes the
// normal matrix pentadiagonal.
TvResult tv_derivative(std::span<const double> times, std::span<const double> y,
                       double alpha, int max_iters = 60, double eps = 1e-8);

struct PolyLibrary {
    Matrix theta;                               // n x J
    std::vector<std::vector<int>> exponents;    // graded-lex multi-indices
    std::vector<std::string> names;
};

PolyLibrary poly_library(const Matrix& states, int degree);

struct SindyResult {
    std::vector<std::vector<int>> dictionary_exponents;
    std::vector<std::string> dictionary_names;
    Matrix coefficients;    // J x d
    double threshold = 0.0;
    int iterations_used = 0;
    bool rank_deficient = false;
};

SindyResult stls(const PolyLibrary& library, const Matrix& xdot, double threshold,
                 int max_iters = 20);

} // namespace odefit::baselines
