// odefit: derivative/trajectory fitting from noisy time series, dynamics
// recovery, baselines, and the benchmark harness.

#include "odefit/bench.hpp"

#include <CLI11.hpp>

#include <cstdlib>
#include <iostream>

namespace {

int run_with_methods(const std::string& config_path, const std::string& out_dir,
                     std::optional<uint64_t> seed_override, int threads, bool allow_large,
                     const std::string& subcommand) {
    odefit::bench::ExperimentConfig cfg = odefit::bench::load_config_file(config_path);
    if (seed_override) cfg.seeds = {*seed_override};

    // Subcommands narrow the configured method set.
    if (subcommand == "simulate") {
        cfg.vrkhs.reset();
        cfg.fd = false;
        cfg.tv.reset();
        cfg.sindy.reset();
        cfg.dynlearn.reset();
    } else if (subcommand == "fit") {
        if (!cfg.vrkhs) throw std::invalid_argument("fit: config has no methods.vrkhs block");
        cfg.fd = false;
        cfg.tv.reset();
        cfg.sindy.reset();
        cfg.dynlearn.reset();
    } else if (subcommand == "learn") {
        if (!cfg.vrkhs || !cfg.dynlearn)
            throw std::invalid_argument("learn: config needs methods.vrkhs and methods.dynlearn");
        cfg.fd = false;
        cfg.tv.reset();
        cfg.sindy.reset();
    } else if (subcommand == "baseline") {
        if (!cfg.fd && !cfg.tv && !cfg.sindy)
            throw std::invalid_argument("baseline: config has no fd/tv/sindy methods");
        if (!cfg.sindy) cfg.vrkhs.reset();
        cfg.dynlearn.reset();
    } // bench: run everything configured

    odefit::bench::RunOptions opts;
    opts.out_dir = out_dir;
    opts.threads = threads;
    opts.allow_large = allow_large;
    const odefit::bench::Report report = odefit::bench::run_experiment(cfg, opts);

    std::cout << report.name << ": " << report.per_seed.size() << " seed(s)\n";
    for (const auto& [metric, value] : report.means)
        std::cout << "  mean " << metric << " = " << value << "\n";
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"vRKHS derivative fitting and dynamics recovery benchmark tool"};
    app.require_subcommand(1);

    std::string config_path, out_dir = "out", configs_dir = "configs";
    int threads = 0;
    bool allow_large = false;
    std::optional<uint64_t> seed_override;

    const auto add_common = [&](CLI::App* sub, bool needs_config) {
        if (needs_config)
            sub->add_option("--config", config_path, "experiment config (JSON)")->required();
        sub->add_option("--out", out_dir, "output directory");
        sub->add_option("--seed", seed_override, "override the config seed list");
        sub->add_option("--threads", threads, "worker thread cap (ODEFIT_THREADS as fallback)");
        sub->add_flag("--allow-large", allow_large, "permit n > 8000 (O(n^3) eigensolve)");
    };

    CLI::App* simulate = app.add_subcommand("simulate", "generate benchmark data only");
    CLI::App* fit = app.add_subcommand("fit", "fit derivative and trajectory");
    CLI::App* learn = app.add_subcommand("learn", "fit, then recover the vector field");
    CLI::App* baseline = app.add_subcommand("baseline", "run fd/tv/sindy comparators");
    CLI::App* bench = app.add_subcommand("bench", "run every configured method");
    for (CLI::App* sub : {simulate, fit, learn, baseline, bench}) add_common(sub, true);

    CLI::App* reproduce = app.add_subcommand("reproduce", "rerun the bundled benchmark tables");
    reproduce->add_option("--configs", configs_dir, "directory with the bundled configs");
    reproduce->add_option("--out", out_dir, "output directory");
    reproduce->add_option("--threads", threads, "worker thread cap");

    CLI11_PARSE(app, argc, argv);

    try {
        if (reproduce->parsed()) {
            odefit::bench::RunOptions opts;
            opts.threads = threads;
            const odefit::bench::ReproduceOutcome outcome =
                odefit::bench::reproduce_all(configs_dir, out_dir, opts);
            std::cout << "reproduce: " << outcome.reports.size() << " table runs, "
                      << outcome.tables_failed << " tolerance failures (see "
                      << out_dir << "/summary.csv)\n";
            return outcome.tables_failed == 0 ? 0 : 3;
        }
        const std::string sub = app.get_subcommands().front()->get_name();
        return run_with_methods(config_path, out_dir, seed_override, threads, allow_large, sub);
    } catch (const std::invalid_argument& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "numerical failure: " << e.what() << "\n";
        return 2;
    }
}
