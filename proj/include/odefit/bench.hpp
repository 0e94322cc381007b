#pragma once
// Experiment configuration, error metrics, and the harness that reruns the
// benchmark tables. Configs are strict JSON: unknown keys are rejected and
// the effective (fully defaulted) config is echoed next to the results.

#include "odefit/baselines.hpp"
#include "odefit/derivfit.hpp"
#include "odefit/dynlearn.hpp"
#include "odefit/kernels.hpp"
#include "odefit/systems.hpp"

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace odefit::bench {

struct SamplingConfig {
    double t0 = 0.0;
    double t_end = 1.0;
    std::size_t n = 100;
    systems::SampleMode mode = systems::SampleMode::Uniform;
};

struct VrkhsConfig {
    kernels::KernelSpec kernel = kernels::KernelSpec::gaussian(1.0);
    derivfit::LCurveOptions lcurve;
    std::string lambda = "lcurve"; // "lcurve" | "floor" | numeric literal
};

struct TvConfig {
    double alpha_min = 1e-7;
    double alpha_max = 1.0;
    int alpha_count = 20;
    double eps = 1e-8;
    int max_iters = 60;
};

struct SindyConfig {
    int degree = 2;
    double threshold = 0.5;
    int max_iters = 20;
};

struct PredictConfig {
    bool enabled = false;
    double t_end = 0.0;
    std::size_t n_out = 500;
    double tol = 1e-8;
};

struct DynlearnConfig {
    kernels::KernelSpec kernel = kernels::KernelSpec::gaussian(100.0);
    derivfit::LCurveOptions lcurve;
    dynlearn::Box region;
    std::size_t field_n_grid = 100000;
    uint64_t field_seed = 7;
    PredictConfig predict;
};

struct ExperimentConfig {
    std::string name;
    std::string system; // cos | pendulum | lotka_volterra | sir | lorenz63 | lorenz96
    std::map<std::string, double> system_params;
    SamplingConfig sampling;
    double noise_delta = 0.0;
    std::vector<uint64_t> seeds{0};
    double integrator_tol = 1e-10;

    std::optional<VrkhsConfig> vrkhs;
    bool fd = false;
    std::optional<TvConfig> tv;
    std::optional<SindyConfig> sindy;       // runs on the vrkhs fit
    std::optional<DynlearnConfig> dynlearn; // runs on the vrkhs fit

    void validate() const;
};

ExperimentConfig parse_config(const std::string& json_text);
std::string serialize_config(const ExperimentConfig& config);
ExperimentConfig load_config_file(const std::string& path);

// sqrt(sum_i ||e_i - t_i||^2) / sqrt(sum_i ||t_i||^2) over rows.
double relative_l2_error(const Matrix& estimate, const Matrix& truth);

struct SeedMetrics {
    uint64_t seed = 0;
    std::map<std::string, double> values; // metric name -> value
};

struct Report {
    std::string name;
    ExperimentConfig config;
    std::vector<SeedMetrics> per_seed;
    std::map<std::string, double> means;

    double mean(const std::string& metric) const;
};

// Cache of Gram/eigendecompositions shared across runs with identical
// sampling design and kernel.
class GramCache {
public:
    std::shared_ptr<const derivfit::GramEig> get(const kernels::KernelSpec& kernel,
                                                 const std::vector<double>& shifted_times);

private:
    std::map<std::string, std::shared_ptr<const derivfit::GramEig>> entries_;
};

struct RunOptions {
    std::string out_dir;    // empty: no files, metrics only
    int threads = 0;        // 0: hardware default
    bool allow_large = false;
    GramCache* cache = nullptr;
};

Report run_experiment(const ExperimentConfig& config, const RunOptions& options);

struct ReproduceOutcome {
    std::vector<Report> reports;
    int tables_failed = 0;
};

// Runs the bundled table configs from configs_dir, writes per-table outputs
// plus summary.csv with a tolerance-check column.
ReproduceOutcome reproduce_all(const std::string& configs_dir, const std::string& out_dir,
                               const RunOptions& options);

// Truth helpers shared with the acceptance suite.
struct GeneratedData {
    derivfit::TimeSeries observed;   // noisy
    Matrix truth_values;             // n x d
    Matrix truth_derivatives;        // n x d
};

GeneratedData generate_data(const ExperimentConfig& config, uint64_t seed);

} // namespace odefit::bench
