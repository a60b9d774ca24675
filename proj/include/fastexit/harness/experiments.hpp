#pragma once

#include "fastexit/harness/config.hpp"

#include <json.hpp>

#include <filesystem>
#include <memory>
#include <string>
#include <vector>

namespace fastexit {

enum ExitStatus : int { kStatusOk = 0, kStatusError = 1, kStatusHypothesis = 2, kStatusDiverged = 3 };

struct BuiltSystem {
    std::shared_ptr<const SpectralOperator> op;
    SpdeSystem sys;
    std::shared_ptr<const AveragedModel> model;
    Field x;
};

BuiltSystem build_system(const ExperimentConfig& cfg);

struct RunResult {
    int status = kStatusOk;
    std::vector<std::string> outputs;  // relative to the output directory
    nlohmann::json summary;
};

/// All hypothesis probes applicable to `target`; `status` is 2 when a required one fails.
RunResult run_check(const ExperimentConfig& cfg, const std::filesystem::path& out, const std::string& target);
RunResult run_simulate(const ExperimentConfig& cfg, const std::filesystem::path& out);
RunResult run_average(const ExperimentConfig& cfg, const std::filesystem::path& out);
RunResult run_action(const ExperimentConfig& cfg, const std::filesystem::path& out);
RunResult run_quasipotential(const ExperimentConfig& cfg, const std::filesystem::path& out);
RunResult run_exit(const ExperimentConfig& cfg, const std::filesystem::path& out);

/// Dispatches on cfg.experiment, writes config.resolved.json and manifest.json
/// beside the results. Divergence maps to status 3.
RunResult run_experiment(const ExperimentConfig& cfg, const std::filesystem::path& out);

/// Reshapes exit.csv / averaging.csv / quasipotential.csv found in `results`
/// into plots/exit_scaling.csv, plots/averaging.csv and plots/long.csv.
/// Throws std::runtime_error naming the directory or the absent artifacts.
std::vector<std::filesystem::path> emit_plot_data(const std::filesystem::path& results);

}  // namespace fastexit
