#pragma once

#include "fastexit/coefficients.hpp"
#include "fastexit/exit.hpp"
#include "fastexit/solver.hpp"

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace fastexit {

struct SpectrumQConfig {
    std::string kind = "flat";  // flat | list | power_law
    double value = 1.0;
    double amplitude = 1.0;
    double exponent = 1.0;
    std::vector<double> values;

    CovarianceSpectrumQ build(std::size_t n_modes) const;
};

/// x(xi) = constant + sum amplitude * cos(k pi xi), projected on the modes;
/// an explicit coefficient list takes precedence.
struct InitialConfig {
    double constant = 0.0;
    std::vector<std::pair<int, double>> cosines;
    std::vector<double> coeffs;

    Field build(const SpectralOperator& op) const;
};

struct ExperimentConfig {
    std::string experiment = "check";
    std::uint64_t seed = 1;
    std::string output_dir = "out";
    std::size_t threads = 1;

    // operator
    std::string builder = "neumann_laplacian_1d";
    std::size_t n_modes = 16;
    std::size_t quadrature_points = 0;
    int dimension = 1;
    double diffusivity_a0 = 1.0;  // a(xi) = a0 + a1 xi for the divergence builder
    double diffusivity_a1 = 0.0;

    CoefficientSet coefficients;
    SpectrumQConfig q;
    BoundaryData thetas{{1.0, 1.0}};
    double delta0 = 1.0;

    Schedule schedule;
    std::vector<double> eps{0.01};
    double rho_tolerance = 1e-9;

    double T = 1.0;
    double dt = 1e-3;
    double delta = 0.5;
    std::size_t record_every = 1;
    std::size_t paths = 100;
    InitialConfig initial;

    // check
    std::string check_target = "exit";
    std::vector<double> t_grid{0.0, 1.0};
    std::vector<double> u_grid{-2.0, -1.0, -0.5, 0.0, 0.5, 1.0, 2.0};
    double nondeg_floor = 1e-12;
    std::size_t lipschitz_samples = 1000;

    // action
    std::vector<std::pair<double, double>> action_knots{{0.0, 0.0}, {1.0, 1.0}};
    std::size_t action_nodes = 1001;

    // quasipotential
    std::vector<double> qp_y{0.25, 0.5, 1.0};
    std::vector<double> horizons{2.0, 4.0, 8.0};
    std::size_t qp_nodes = 200;

    // exit
    ConvexProfile profile = ConvexProfile::square();
    double r = 0.25;
    std::vector<double> gamma_grid{0.25, 0.125, 0.0625};
    std::size_t exit_paths = 500;
    double exit_dt = 1e-3;
    std::optional<double> t_max;
    double t_max_cap = 1e4;
    double rho_ball = 0.0;
    double concentration_ratio = 0.1;
};

/// Validates and parses; throws ConfigError carrying the offending field path.
ExperimentConfig parse_config(const nlohmann::json& j);
ExperimentConfig load_config(const std::filesystem::path& path);

/// Fully resolved form: every default materialized. parse_config(to_json(c)) == c.
nlohmann::json to_json(const ExperimentConfig& c);

}  // namespace fastexit
