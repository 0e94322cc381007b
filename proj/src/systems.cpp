#include "odefit/systems.hpp"
#include "odefit/rng.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <stdexcept>

namespace odefit::rng {

void normal_pair(uint64_t seed, uint64_t stream, uint64_t index, double& z0, double& z1) {
    double u0, u1;
    uniform_pair(seed, stream, index, u0, u1);
    const double r = std::sqrt(-2.0 * std::log(u0));
    const double a = 2.0 * 3.14159265358979323846 * u1;
    z0 = r * std::cos(a);
    z1 = r * std::sin(a);
}

} // namespace odefit::rng

namespace odefit::systems {

std::vector<double> OdeSystem::eval(std::span<const double> x) const {
    require(x.size() == dimension, "OdeSystem::eval: dimension mismatch");
    std::vector<double> out(dimension);
    rhs(x, out);
    return out;
}

namespace {

std::map<std::string, double> merge_params(const std::map<std::string, double>& defaults,
                                           const std::map<std::string, double>& overrides,
                                           const std::string& name) {
    std::map<std::string, double> out = defaults;
    for (const auto& [key, value] : overrides) {
        auto it = out.find(key);
        if (it == out.end())
            throw std::invalid_argument("make_system(" + name + "): unknown parameter " + key);
        it->second = value;
    }
    return out;
}

} // namespace

OdeSystem make_system(const std::string& name, const std::map<std::string, double>& parameters) {
    OdeSystem sys;
    sys.name = name;
    if (name == "pendulum") {
        // theta'' + alpha sin(theta) = cos(e^theta), alpha = g/L with L = 5
        sys.parameters = merge_params({{"alpha", 9.8 / 5.0}}, parameters, name);
        sys.dimension = 2;
        sys.default_x0 = {0.0, 0.0};
        const double alpha = sys.parameters.at("alpha");
        sys.rhs = [alpha](std::span<const double> x, std::span<double> dx) {
            dx[0] = x[1];
            dx[1] = std::cos(std::exp(x[0])) - alpha * std::sin(x[0]);
        };
    } else if (name == "lotka_volterra") {
        sys.parameters = merge_params(
            {{"alpha", 0.7}, {"beta", 0.007}, {"gamma", 1.0}, {"delta", 0.007}}, parameters, name);
        sys.dimension = 2;
        sys.default_x0 = {70.0, 50.0};
        const double a = sys.parameters.at("alpha"), b = sys.parameters.at("beta");
        const double g = sys.parameters.at("gamma"), d = sys.parameters.at("delta");
        sys.rhs = [a, b, g, d](std::span<const double> x, std::span<double> dx) {
            dx[0] = a * x[0] - b * x[0] * x[1];
            dx[1] = d * x[0] * x[1] - g * x[1];
        };
    } else if (name == "sir") {
        sys.parameters = merge_params({{"beta", 0.4}, {"gamma", 0.04}}, parameters, name);
        sys.dimension = 3;
        sys.default_x0 = {900.0, 10.0, 0.0};
        const double b = sys.parameters.at("beta"), g = sys.parameters.at("gamma");
        sys.rhs = [b, g](std::span<const double> x, std::span<double> dx) {
            const double total = x[0] + x[1] + x[2];
            const double infect = b * x[0] * x[1] / total;
            dx[0] = -infect;
            dx[1] = infect - g * x[1];
            dx[2] = g * x[1];
        };
    } else if (name == "lorenz63") {
        sys.parameters = merge_params({{"sigma", 10.0}, {"rho", 28.0}, {"beta", 8.0 / 3.0}},
                                      parameters, name);
        sys.dimension = 3;
        sys.default_x0 = {1.0, 1.0, 1.0};
        const double s = sys.parameters.at("sigma"), r = sys.parameters.at("rho");
        const double b = sys.parameters.at("beta");
        sys.rhs = [s, r, b](std::span<const double> x, std::span<double> dx) {
            dx[0] = s * (x[1] - x[0]);
            dx[1] = x[0] * (r - x[2]) - x[1];
            dx[2] = x[0] * x[1] - b * x[2];
        };
    } else if (name == "lorenz96") {
        sys.parameters = merge_params({{"forcing", 8.0}, {"sites", 5.0}}, parameters, name);
        const std::size_t nsites = static_cast<std::size_t>(sys.parameters.at("sites"));
        require(nsites >= 4, "lorenz96 needs at least 4 sites");
        sys.dimension = nsites;
        sys.default_x0.assign(nsites, 8.0);
        sys.default_x0[0] = 8.01;
        const double f = sys.parameters.at("forcing");
        sys.rhs = [f, nsites](std::span<const double> x, std::span<double> dx) {
            for (std::size_t i = 0; i < nsites; ++i) {
                const std::size_t ip1 = (i + 1) % nsites;
                const std::size_t im1 = (i + nsites - 1) % nsites;
                const std::size_t im2 = (i + nsites - 2) % nsites;
                dx[i] = (x[ip1] - x[im2]) * x[im1] - x[i] + f;
            }
        };
    } else {
        throw std::invalid_argument("make_system: unknown system " + name);
    }
    return sys;
}

// -------------------------------------------------- Dormand-Prince 5(4)

namespace {

constexpr double A21 = 1.0 / 5.0;
constexpr double A31 = 3.0 / 40.0, A32 = 9.0 / 40.0;
constexpr double A41 = 44.0 / 45.0, A42 = -56.0 / 15.0, A43 = 32.0 / 9.0;
constexpr double A51 = 19372.0 / 6561.0, A52 = -25360.0 / 2187.0, A53 = 64448.0 / 6561.0,
                 A54 = -212.0 / 729.0;
constexpr double A61 = 9017.0 / 3168.0, A62 = -355.0 / 33.0, A63 = 46732.0 / 5247.0,
                 A64 = 49.0 / 176.0, A65 = -5103.0 / 18656.0;
constexpr double B1 = 35.0 / 384.0, B3 = 500.0 / 1113.0, B4 = 125.0 / 192.0,
                 B5 = -2187.0 / 6784.0, B6 = 11.0 / 84.0;
constexpr double E1 = B1 - 5179.0 / 57600.0, E3 = B3 - 7571.0 / 16695.0,
                 E4 = B4 - 393.0 / 640.0, E5 = B5 + 92097.0 / 339200.0,
                 E6 = B6 - 187.0 / 2100.0, E7 = -1.0 / 40.0;

} // namespace

IntegrateResult integrate(const OdeSystem& system, std::span<const double> x0,
                          std::span<const double> times, double tol) {
    require(tol > 0.0, "integrate: tol must be positive");
    require(x0.size() == system.dimension, "integrate: x0 dimension mismatch");
    require(!times.empty(), "integrate: need at least one output time");
    for (std::size_t i = 0; i < times.size(); ++i) {
        require(std::isfinite(times[i]), "integrate: times must be finite");
        require(times[i] > (i == 0 ? 0.0 : times[i - 1]) || (i == 0 && times[i] >= 0.0),
                "integrate: times must be increasing");
    }

    const std::size_t d = system.dimension;
    IntegrateResult result;
    result.values = Matrix(times.size(), d);
    result.complete = true;
    result.last_time = 0.0;

    std::vector<double> y(x0.begin(), x0.end()), ynew(d), ytmp(d), err(d);
    std::vector<double> k1(d), k2(d), k3(d), k4(d), k5(d), k6(d), k7(d);
    double t = 0.0;
    system.rhs(y, k1);

    // Steps land exactly on every requested output time; no interpolation.
    std::size_t next_out = 0;
    while (next_out < times.size() && times[next_out] <= t) {
        for (std::size_t c = 0; c < d; ++c) result.values(next_out, c) = y[c];
        ++next_out;
    }

    double h = std::min(1e-2, times.back() > 0 ? times.back() / 100.0 : 1e-2);
    const double t_end = times.back();
    while (next_out < times.size()) {
        if (h < 1e-14 * std::max(1.0, std::fabs(t)) || !std::isfinite(h)) {
            result.complete = false;
            break;
        }
        if (t + h > times[next_out]) h = times[next_out] - t;

        for (std::size_t c = 0; c < d; ++c) ytmp[c] = y[c] + h * A21 * k1[c];
        system.rhs(ytmp, k2);
        for (std::size_t c = 0; c < d; ++c) ytmp[c] = y[c] + h * (A31 * k1[c] + A32 * k2[c]);
        system.rhs(ytmp, k3);
        for (std::size_t c = 0; c < d; ++c)
            ytmp[c] = y[c] + h * (A41 * k1[c] + A42 * k2[c] + A43 * k3[c]);
        system.rhs(ytmp, k4);
        for (std::size_t c = 0; c < d; ++c)
            ytmp[c] = y[c] + h * (A51 * k1[c] + A52 * k2[c] + A53 * k3[c] + A54 * k4[c]);
        system.rhs(ytmp, k5);
        for (std::size_t c = 0; c < d; ++c)
            ytmp[c] = y[c] + h * (A61 * k1[c] + A62 * k2[c] + A63 * k3[c] + A64 * k4[c] +
                                  A65 * k5[c]);
        system.rhs(ytmp, k6);
        for (std::size_t c = 0; c < d; ++c)
            ynew[c] = y[c] + h * (B1 * k1[c] + B3 * k3[c] + B4 * k4[c] + B5 * k5[c] + B6 * k6[c]);
        system.rhs(ynew, k7);

        double err_norm = 0.0;
        for (std::size_t c = 0; c < d; ++c) {
            err[c] = h * (E1 * k1[c] + E3 * k3[c] + E4 * k4[c] + E5 * k5[c] + E6 * k6[c] +
                          E7 * k7[c]);
            const double scale = tol + tol * std::max(std::fabs(y[c]), std::fabs(ynew[c]));
            const double r = err[c] / scale;
            err_norm += r * r;
        }
        err_norm = std::sqrt(err_norm / static_cast<double>(d));

        if (err_norm <= 1.0) {
            t += h;
            y.swap(ynew);
            k1.swap(k7);
            result.last_time = t;
            while (next_out < times.size() && times[next_out] <= t + 1e-14 * std::max(1.0, t)) {
                for (std::size_t c = 0; c < d; ++c) result.values(next_out, c) = y[c];
                ++next_out;
            }
            if (!std::isfinite(y[0])) {
                result.complete = false;
                break;
            }
        }
        const double factor = err_norm > 0.0 ? 0.9 * std::pow(err_norm, -0.2) : 5.0;
        h *= std::clamp(factor, 0.2, 5.0);
        if (t + h > t_end && t_end > t) h = t_end - t;
    }
    return result;
}

Matrix integrate_exact(const OdeSystem& system, std::span<const double> x0,
                       std::span<const double> times, double tol) {
    IntegrateResult r = integrate(system, x0, times, tol);
    if (!r.complete)
        throw std::runtime_error("integrate: step-size underflow at t = " +
                                 std::to_string(r.last_time));
    return std::move(r.values);
}

// ------------------------------------------------------------- sampling

std::vector<double> sample_times(double t_end, std::size_t n, SampleMode mode, uint64_t seed) {
    require(t_end > 0.0, "sample_times: t_end must be positive");
    require(n >= 1, "sample_times: n must be >= 1");
    std::vector<double> out(n);
    if (mode == SampleMode::Uniform) {
        for (std::size_t i = 0; i < n; ++i)
            out[i] = static_cast<double>(i + 1) * t_end / static_cast<double>(n);
        return out;
    }
    std::set<double> seen;
    uint64_t index = 0;
    std::size_t filled = 0;
    while (filled < n) {
        const double u = rng::uniform(seed, /*stream=*/1, index++);
        const double t = u * t_end;
        if (t > 0.0 && seen.insert(t).second) ++filled;
    }
    std::copy(seen.begin(), seen.end(), out.begin());
    return out;
}

Matrix add_noise(const Matrix& values, double delta, uint64_t seed) {
    require(delta >= 0.0, "add_noise: delta must be nonnegative");
    if (delta == 0.0) return values;
    Matrix out = values;
    const std::size_t total = values.rows() * values.cols();
    double* p = out.data();
    for (std::size_t pair = 0; pair * 2 < total; ++pair) {
        double z0, z1;
        rng::normal_pair(seed, /*stream=*/2, pair, z0, z1);
        p[2 * pair] += delta * z0;
        if (2 * pair + 1 < total) p[2 * pair + 1] += delta * z1;
    }
    return out;
}

} // namespace odefit::systems
