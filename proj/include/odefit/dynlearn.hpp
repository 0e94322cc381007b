#pragma once
// Vector-field recovery from fitted state/derivative pairs: kernel ridge
// regression over state space with L-curve selection, plus forecasting by
// integrating the recovered field.

#include "odefit/derivfit.hpp"
#include "odefit/kernels.hpp"
#include "odefit/matrix.hpp"
#include "odefit/systems.hpp"

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

namespace odefit::dynlearn {

struct DynamicsModel {
    kernels::KernelSpec kernel;  // over state space, Euclidean distance
    Matrix centers;              // n x d fitted states
    Matrix coefficients;         // d x n
    double lambda_star = 0.0;
    derivfit::LCurveTrace lcurve;
};

struct LearnOptions {
    kernels::KernelSpec kernel = kernels::KernelSpec::gaussian(100.0);
    derivfit::LCurveOptions lcurve;
    std::optional<double> lambda_override;
};

DynamicsModel learn(const Matrix& states, const Matrix& derivs, const LearnOptions& options);

std::vector<double> eval_field(const DynamicsModel& model, std::span<const double> x);

// Integrates xdot = f_hat(x) from x0 over t_span; n_out uniform samples on
// (t0, t1], carried in a TimeSeries.
derivfit::TimeSeries predict(const DynamicsModel& model, std::span<const double> x0,
                             std::pair<double, double> t_span, std::size_t n_out,
                             double tol = 1e-8);

struct Box {
    std::vector<double> lo, hi;
};

using VectorField = std::function<std::vector<double>(std::span<const double>)>;

// Monte Carlo estimate of ||f - f_hat||_L2(region) / ||f||_L2(region).
double field_relative_l2(const DynamicsModel& model, const VectorField& truth,
                         const Box& region, std::size_t n_grid, uint64_t seed);

} // namespace odefit::dynlearn
