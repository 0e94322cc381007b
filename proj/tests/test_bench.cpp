#include <doctest.h>

#include "odefit/bench.hpp"
#include "test_util.hpp"

#include <filesystem>
#include <fstream>
#include <sstream>

using namespace odefit;
using namespace odefit::bench;

namespace {

const char* kSmallConfig = R"({
  "name": "smoke",
  "system": "lotka_volterra",
  "sampling": {"t_end": 4.0, "n": 60, "mode": "uniform"},
  "noise_delta": 0.5,
  "seeds": [0, 1],
  "methods": {
    "vrkhs": {"kernel": {"family": "gaussian", "length_scale": 0.4}},
    "fd": {},
    "tv": {"alpha_count": 5}
  }
})";

std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

} // namespace

TEST_CASE("relative_l2_error: definition") {
    Matrix t(3, 2);
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 2; ++j) t(i, j) = testutil::uniform(141, i * 2 + j, -2, 2);
    CHECK(relative_l2_error(t, t) == 0.0);
    Matrix zero(3, 2, 0.0);
    CHECK(relative_l2_error(zero, t) == doctest::Approx(1.0));
    Matrix scaled = t;
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 2; ++j) scaled(i, j) *= 1.1;
    CHECK(relative_l2_error(scaled, t) == doctest::Approx(0.1).epsilon(1e-12));
    CHECK_THROWS_AS((void)relative_l2_error(t, zero), std::runtime_error);

    // monotone in the error scale
    Matrix e(3, 2);
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 2; ++j) e(i, j) = testutil::uniform(142, i * 2 + j, -1, 1);
    double last = 0.0;
    for (double c : {0.0, 0.5, 1.0, 2.0}) {
        Matrix est = t;
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 2; ++j) est(i, j) += c * e(i, j);
        const double err = relative_l2_error(est, t);
        CHECK(err >= last);
        last = err;
    }
}

TEST_CASE("config: round trip and strict parsing") {
    const ExperimentConfig c = parse_config(kSmallConfig);
    CHECK(c.system == "lotka_volterra");
    CHECK(c.seeds.size() == 2);
    REQUIRE(c.vrkhs.has_value());
    CHECK(c.vrkhs->kernel.length_scale == 0.4);
    CHECK(c.fd);
    REQUIRE(c.tv.has_value());
    CHECK(c.tv->alpha_count == 5);

    const ExperimentConfig c2 = parse_config(serialize_config(c));
    CHECK(serialize_config(c2) == serialize_config(c));

    CHECK_THROWS_AS((void)parse_config(R"({"system": "lorenz63"})"), std::invalid_argument);
    CHECK_THROWS_AS(
        (void)parse_config(
            R"({"system": "lorenz63", "sampling": {"t_end": 1, "n": 5}, "noise_delta": 0,
                "methods": {}, "bogus": 1})"),
        std::invalid_argument);
    // tv on random sampling is rejected
    CHECK_THROWS_AS(
        (void)parse_config(
            R"({"system": "lorenz63", "sampling": {"t_end": 1, "n": 5, "mode": "random"},
                "noise_delta": 0, "methods": {"tv": {}}})"),
        std::invalid_argument);
}

TEST_CASE("run_experiment: smoke run with deterministic outputs") {
    const ExperimentConfig c = parse_config(kSmallConfig);
    RunOptions opts;
    const auto tmp1 = std::filesystem::temp_directory_path() / "odefit_test_run1";
    const auto tmp2 = std::filesystem::temp_directory_path() / "odefit_test_run2";
    std::filesystem::remove_all(tmp1);
    std::filesystem::remove_all(tmp2);

    opts.out_dir = tmp1.string();
    const Report r1 = run_experiment(c, opts);
    CHECK(r1.per_seed.size() == 2);
    CHECK(r1.mean("vrkhs_deriv_rel_l2") < 1.0);
    CHECK(r1.mean("vrkhs_lcurve_monotone") == 1.0);
    CHECK(r1.mean("vrkhs_lambda_in_range") == 1.0);
    CHECK(r1.mean("fd_deriv_rel_l2") > r1.mean("vrkhs_deriv_rel_l2"));

    opts.out_dir = tmp2.string();
    (void)run_experiment(c, opts);
    for (const char* f : {"smoke_errors.csv", "smoke_series.csv", "smoke_lcurve.csv",
                          "smoke_effective_config.json"}) {
        CAPTURE(f);
        CHECK(slurp(tmp1 / f) == slurp(tmp2 / f));
        CHECK(!slurp(tmp1 / f).empty());
    }
    std::filesystem::remove_all(tmp1);
    std::filesystem::remove_all(tmp2);
}

TEST_CASE("run_experiment: noise-free vrkhs trajectory sanity") {
    const char* cfg = R"({
      "name": "noisefree",
      "system": "lotka_volterra",
      "sampling": {"t_end": 4.0, "n": 80, "mode": "uniform"},
      "noise_delta": 0.0,
      "seeds": [0],
      "methods": {
        "vrkhs": {"kernel": {"family": "gaussian", "length_scale": 0.4}, "lambda": "floor"}
      }
    })";
    const Report r = run_experiment(parse_config(cfg), RunOptions{});
    CHECK(r.mean("vrkhs_traj_rel_l2") <= 1e-4);
}

TEST_CASE("run_experiment: large-n guard") {
    const char* cfg = R"({
      "name": "big",
      "system": "lorenz63",
      "sampling": {"t_end": 30.0, "n": 8001, "mode": "uniform"},
      "noise_delta": 0.1,
      "seeds": [0],
      "methods": {"fd": {}}
    })";
    CHECK_THROWS_AS((void)run_experiment(parse_config(cfg), RunOptions{}),
                    std::invalid_argument);
}

TEST_CASE("generate_data: cos benchmark wiring") {
    const char* cfg = R"({
      "name": "cosbench",
      "system": "cos",
      "sampling": {"t0": -0.5, "t_end": 0.5, "n": 100, "mode": "uniform"},
      "noise_delta": 0.01,
      "seeds": [0],
      "methods": {"fd": {}}
    })";
    const ExperimentConfig c = parse_config(cfg);
    const GeneratedData d = generate_data(c, 0);
    CHECK(d.observed.t0 == -0.5);
    CHECK(d.observed.x0[0] == doctest::Approx(std::cos(-0.5)));
    CHECK(d.observed.times.front() > -0.5);
    CHECK(d.observed.times.back() == doctest::Approx(0.5));
    CHECK(d.truth_derivatives(10, 0) == doctest::Approx(-std::sin(d.observed.times[10])));
}
