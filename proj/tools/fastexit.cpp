#include "fastexit/errors.hpp"
#include "fastexit/harness/config.hpp"
#include "fastexit/harness/experiments.hpp"

#include <CLI11.hpp>

#include <cstdlib>
#include <iostream>
#include <optional>
#include <string>

namespace {

struct Overrides {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> out;
    std::optional<std::size_t> threads;
    std::optional<std::size_t> paths;
};

void add_common(CLI::App* sub, Overrides& o) {
    sub->add_option("--config", o.config, "experiment config (JSON)")->required()->check(CLI::ExistingFile);
    sub->add_option("--seed", o.seed, "override the config seed");
    sub->add_option("--out", o.out, "output directory");
    sub->add_option("--threads", o.threads, "worker threads (falls back to FASTEXIT_THREADS)")
        ->check(CLI::PositiveNumber);
    sub->add_option("--paths", o.paths, "override path counts")->check(CLI::PositiveNumber);
}

fastexit::ExperimentConfig resolve(const Overrides& o, const std::string& kind) {
    auto cfg = fastexit::load_config(o.config);
    cfg.experiment = kind;
    if (o.seed) cfg.seed = *o.seed;
    if (o.out) cfg.output_dir = *o.out;
    if (o.paths) {
        cfg.paths = *o.paths;
        cfg.exit_paths = *o.paths;
    }
    if (o.threads) {
        cfg.threads = *o.threads;
    } else if (const char* env = std::getenv("FASTEXIT_THREADS")) {
        try {
            const long n = std::stol(env);
            if (n < 1) throw std::invalid_argument("");
            cfg.threads = static_cast<std::size_t>(n);
        } catch (const std::exception&) {
            throw fastexit::ConfigError("FASTEXIT_THREADS", "expected a positive integer");
        }
    }
    return cfg;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Multiscale reaction-diffusion SPDE laboratory: averaging, action, quasi-potential and exit times"};
    app.require_subcommand(1);
    Overrides o;
    std::string plots_dir;
    for (const char* name : {"check", "simulate", "average", "action", "quasipotential", "exit"})
        add_common(app.add_subcommand(name, std::string("run the ") + name + " experiment"), o);
    auto* plots = app.add_subcommand("emit-plots", "reshape results into plot-ready CSV files");
    plots->add_option("--out,dir", plots_dir, "results directory")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (plots->parsed()) {
            for (const auto& p : fastexit::emit_plot_data(plots_dir)) std::cout << p.string() << '\n';
            return fastexit::kStatusOk;
        }
        const std::string kind = app.get_subcommands().front()->get_name();
        const auto cfg = resolve(o, kind);
        const auto res = fastexit::run_experiment(cfg, cfg.output_dir);
        std::cout << res.summary.dump(2) << '\n';
        return res.status;
    } catch (const fastexit::ConfigError& e) {
        std::cerr << "config error at " << e.field_path() << ": " << e.what() << '\n';
        return fastexit::kStatusError;
    } catch (const fastexit::DivergedError& e) {
        std::cerr << "diverged: " << e.what() << '\n';
        return fastexit::kStatusDiverged;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return fastexit::kStatusError;
    }
}
