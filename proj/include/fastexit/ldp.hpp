#pragma once

// Action functional of the one-dimensional limit dynamics, its minimizing
// control, the prefix cost J, and the quasi-potential.
//
// Discretization: on each interval the slope (w_{i+1} - w_i)/dt is compared
// with the drift at the interval midpoint, so the discrete action is exactly
// half the squared L^2 norm of the piecewise-constant minimizing control.

#include "fastexit/coefficients.hpp"
#include "fastexit/control.hpp"
#include "fastexit/solver.hpp"

#include <filesystem>
#include <functional>
#include <limits>
#include <vector>

namespace fastexit {

/// Piecewise-linear path on a uniform grid.
struct ScalarPath {
    std::vector<double> times;
    std::vector<double> values;

    static ScalarPath uniform(double a, double b, std::vector<double> values);
    static ScalarPath sample(double a, double b, std::size_t nodes, const std::function<double(double)>& w);
    static ScalarPath from(const ScalarTrajectory& traj);

    std::size_t size() const { return values.size(); }
    double dt() const { return times[1] - times[0]; }
    /// Throws std::invalid_argument unless the grid is uniform with >= 2 nodes and values are finite.
    void validate() const;
};

struct ActionValue {
    double value = 0.0;
    bool infinite = false;

    static ActionValue inf() { return {std::numeric_limits<double>::infinity(), true}; }
    bool is_finite() const { return !infinite; }
};

/// 1/2 sum dt (s_i - Fbar(t_mid, w_mid))^2 / H(t_mid, w_mid).
/// Throws NondegeneracyError if H <= 0 at some midpoint.
ActionValue action_I(const AveragedModel& model, const ScalarPath& w);

/// Field-valued path: +infinity as soon as any non-constant mode exceeds `tolerance`,
/// otherwise the action of the constant-mode path.
ActionValue action_I(const AveragedModel& model, const FieldTrajectory& path, double tolerance = 0.0);

/// phi = c (a G_row, b Sigma_row) with c = (s - Fbar)/H per interval,
/// a = 1/(1+rho), b = rho/(1+rho).
ControlPath minimizing_control(const AveragedModel& model, const ScalarPath& w);

struct PathOptimum {
    double value = 0.0;
    ScalarPath path;
    int iterations = 0;
};

struct OptimizerSettings {
    double gradient_tolerance = 1e-8;
    int max_iterations = 10000;
};

/// Minimizes the discrete action over interior node values of a path on
/// [t0, t1] with `nodes` grid points and fixed end values, starting from the
/// straight line. Throws OptimizationFailed carrying the best value reached.
PathOptimum minimize_action(const AveragedModel& model, double t0, double t1, std::size_t nodes, double w0,
                            double w1, OptimizerSettings settings = {});

/// Minimal cost of reaching y_delta at time delta from x_mean.
double prefix_action_J(const AveragedModel& model, double x_mean, double y_delta, double delta,
                       std::size_t grid_nodes);

/// -(2/H) * integral_0^y Fbar. Throws NotApplicable unless noise is additive.
double quasi_potential_explicit(const AveragedModel& model, double y);

struct QuasiPotentialResult {
    double value = 0.0;
    std::vector<double> horizons;
    std::vector<double> per_horizon;
    ScalarPath best_path;
};

/// inf over the listed horizons of the minimal action from 0 to y.
QuasiPotentialResult quasi_potential_search(const AveragedModel& model, double y, const std::vector<double>& horizons,
                                            std::size_t nodes);
double quasi_potential_variational(const AveragedModel& model, double y, const std::vector<double>& horizons,
                                   std::size_t nodes);

struct VBarSettings {
    std::vector<double> horizons{2.0, 4.0, 8.0};
    std::size_t nodes = 200;
};

/// min(V(y1), V(y2)); closed form for additive noise, variational otherwise.
double v_bar(const AveragedModel& model, double y1, double y2, const VBarSettings& settings = {});

void write_csv(const std::filesystem::path& path, const ScalarPath& w);
void write_csv(const std::filesystem::path& path, const ControlPath& phi);

}  // namespace fastexit
