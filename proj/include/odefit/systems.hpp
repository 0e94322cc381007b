#pragma once
// The benchmark ODE systems, a reference adaptive Runge-Kutta integrator
// with dense output, time samplers, and Gaussian noise injection.

#include "odefit/matrix.hpp"

#include <cstdint>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <vector>

namespace odefit::systems {

using Rhs = std::function<void(std::span<const double> x, std::span<double> dx)>;

struct OdeSystem {
    std::string name;
    std::size_t dimension = 0;
    std::map<std::string, double> parameters;
    std::vector<double> default_x0;
    Rhs rhs;

    std::vector<double> eval(std::span<const double> x) const;
};

// Recognized names: pendulum, lotka_volterra, sir, lorenz63, lorenz96.
// Empty parameter map takes the benchmark defaults; unknown parameter
// names or wrong arity are rejected.
OdeSystem make_system(const std::string& name,
                      const std::map<std::string, double>& parameters = {});

struct IntegrateResult {
    Matrix values;      // one row per requested time
    bool complete;      // false if the step size underflowed
    double last_time;   // time reached
};

// Dormand-Prince 5(4) with cubic-Hermite dense output at the requested
// times; local error controlled against tol (both absolute and relative).
IntegrateResult integrate(const OdeSystem& system, std::span<const double> x0,
                          std::span<const double> times, double tol);

// Throwing wrapper used by the benchmark pipeline.
Matrix integrate_exact(const OdeSystem& system, std::span<const double> x0,
                       std::span<const double> times, double tol);

enum class SampleMode { Uniform, Random };

// Uniform: t_i = i * t_end / n, i = 1..n. Random: n i.i.d. draws from
// (0, t_end], sorted, duplicates re-drawn; deterministic in seed.
std::vector<double> sample_times(double t_end, std::size_t n, SampleMode mode, uint64_t seed);

// Adds independent N(0, delta^2) noise to every entry; deterministic in seed.
Matrix add_noise(const Matrix& values, double delta, uint64_t seed);

} // namespace odefit::systems
