#pragma once
// Scalar reproducing kernels on the time axis and on state space. Gaussian
// and Matern (nu = 1/2, 3/2, 5/2) both come with closed-form single and
// double integrals, so Gram/basis assembly needs no numerical quadrature.

#include "odefit/matrix.hpp"

#include <cstddef>
#include <span>
#include <vector>

namespace odefit::kernels {

enum class Family { Gaussian, Matern };

struct KernelSpec {
    Family family = Family::Gaussian;
    double length_scale = 1.0;
    double nu = 1.5; // Matern only; one of 1/2, 3/2, 5/2

    static KernelSpec gaussian(double length_scale);
    static KernelSpec matern(double nu, double length_scale);
};

// k(s, t); in (0, 1], equal to 1 iff s == t.
double eval(const KernelSpec& k, double s, double t);

// psi(t) = int_0^{t_upper} k(s, t) ds, exact.
double single_integral(const KernelSpec& k, double t_upper, double t);

// int_0^{t_i} int_0^{t_j} k(s, t) ds dt, exact and symmetric in (t_i, t_j).
double double_integral(const KernelSpec& k, double t_i, double t_j);

// (G1)_ij = double_integral(k, t_i, t_j); times strictly increasing, > 0.
// Upper triangle is assembled and mirrored, so G1 = G1^T bitwise.
Matrix gram_g1(const KernelSpec& k, std::span<const double> times);

// Psi with entry (j, i) = single_integral(k, times[j], eval_times[i]).
Matrix psi_matrix(const KernelSpec& k, std::span<const double> times,
                  std::span<const double> eval_times);

// One column of Psi: psi_j(t) for all centers j at a single eval time.
void psi_column(const KernelSpec& k, std::span<const double> times, double t,
                std::span<double> out);

// Kernel matrix on state-space points (rows of the matrix), Euclidean
// distance; unit diagonal.
Matrix gram_state(const KernelSpec& k, const Matrix& points);

// k(points[i], x) for all rows i.
void state_kernel_column(const KernelSpec& k, const Matrix& points,
                         std::span<const double> x, std::span<double> out);

} // namespace odefit::kernels
