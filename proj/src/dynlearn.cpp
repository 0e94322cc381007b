#include "odefit/dynlearn.hpp"
#include "odefit/rng.hpp"
#include "odefit/simd.hpp"

#include <cmath>
#include <stdexcept>

namespace odefit::dynlearn {

DynamicsModel learn(const Matrix& states, const Matrix& derivs, const LearnOptions& options) {
    require(states.rows() >= 1, "learn: need at least one state");
    require(states.rows() == derivs.rows() && states.cols() == derivs.cols(),
            "learn: states and derivs must have the same shape");
    for (std::size_t i = 0; i < states.rows(); ++i)
        for (std::size_t j = 0; j < states.cols(); ++j)
            require(std::isfinite(states(i, j)) && std::isfinite(derivs(i, j)),
                    "learn: inputs must be finite");

    DynamicsModel model;
    model.kernel = options.kernel;
    model.centers = states;

    const Matrix g = kernels::gram_state(options.kernel, states);
    const numerics::EigenDecomposition eig = numerics::sym_eig(g);
    const Matrix b = derivs.transposed(); // d x n
    model.lcurve = derivfit::lcurve_select(g, eig, b, options.lcurve);
    model.lambda_star = options.lambda_override ? *options.lambda_override
                                                : model.lcurve.selected_lambda();
    model.coefficients = derivfit::coefficients(g, b, model.lambda_star, eig);
    return model;
}

std::vector<double> eval_field(const DynamicsModel& model, std::span<const double> x) {
    const std::size_t n = model.centers.rows(), d = model.centers.cols();
    require(x.size() == d, "eval_field: dimension mismatch");
    std::vector<double> kv(n);
    kernels::state_kernel_column(model.kernel, model.centers, x, kv);
    const auto& ops = simd::active();
    std::vector<double> out(d);
    for (std::size_t r = 0; r < d; ++r) out[r] = ops.dot(model.coefficients.row(r), kv.data(), n);
    return out;
}

derivfit::TimeSeries predict(const DynamicsModel& model, std::span<const double> x0,
                             std::pair<double, double> t_span, std::size_t n_out, double tol) {
    require(t_span.second > t_span.first, "predict: t_span must increase");
    require(n_out >= 2, "predict: n_out must be >= 2");
    const std::size_t d = model.centers.cols();
    require(x0.size() == d, "predict: x0 dimension mismatch");

    systems::OdeSystem sys;
    sys.name = "recovered";
    sys.dimension = d;
    sys.rhs = [&model](std::span<const double> x, std::span<double> dx) {
        const std::vector<double> f = eval_field(model, x);
        std::copy(f.begin(), f.end(), dx.begin());
    };

    const double span = t_span.second - t_span.first;
    std::vector<double> rel_times(n_out);
    for (std::size_t i = 0; i < n_out; ++i)
        rel_times[i] = span * static_cast<double>(i + 1) / static_cast<double>(n_out);

    systems::IntegrateResult r = systems::integrate(sys, x0, rel_times, tol);
    if (!r.complete)
        throw std::runtime_error("predict: recovered field blew up at t = " +
                                 std::to_string(t_span.first + r.last_time));
    derivfit::TimeSeries out;
    out.t0 = t_span.first;
    out.x0.assign(x0.begin(), x0.end());
    out.times.resize(n_out);
    for (std::size_t i = 0; i < n_out; ++i) out.times[i] = t_span.first + rel_times[i];
    out.values = std::move(r.values);
    return out;
}

double field_relative_l2(const DynamicsModel& model, const VectorField& truth,
                         const Box& region, std::size_t n_grid, uint64_t seed) {
    const std::size_t d = model.centers.cols();
    require(region.lo.size() == d && region.hi.size() == d,
            "field_relative_l2: region dimension mismatch");
    for (std::size_t c = 0; c < d; ++c)
        require(region.hi[c] > region.lo[c], "field_relative_l2: empty region");

    double num = 0.0, den = 0.0;
    std::vector<double> x(d);
    for (std::size_t i = 0; i < n_grid; ++i) {
        for (std::size_t c = 0; c < d; ++c) {
            // one uniform per (point, coordinate), indexed for reproducibility
            const double u = rng::uniform(seed, /*stream=*/3, i * d + c);
            x[c] = region.lo[c] + u * (region.hi[c] - region.lo[c]);
        }
        const std::vector<double> ft = truth(x);
        const std::vector<double> fh = eval_field(model, x);
        for (std::size_t c = 0; c < d; ++c) {
            const double e = fh[c] - ft[c];
            num += e * e;
            den += ft[c] * ft[c];
        }
    }
    if (den == 0.0)
        throw std::runtime_error("field_relative_l2: truth vanishes on the region");
    return std::sqrt(num / den);
}

} // namespace odefit::dynlearn
