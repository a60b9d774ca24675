#pragma once

// Time steppers: exponential-Euler for the multiscale SPDE (plain and
// controlled), RK4 for the limit and skeleton ODEs, Euler-Maruyama for the
// averaged SDE.

#include "fastexit/coefficients.hpp"
#include "fastexit/control.hpp"
#include "fastexit/covariance.hpp"
#include "fastexit/noise.hpp"
#include "fastexit/rng.hpp"
#include "fastexit/spectral.hpp"

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace fastexit {

struct MultiscaleParams {
    double eps = 1.0;
    double alpha = 0.0;
    double beta = 0.0;
    RhoBar rho_bar = RhoBar::finite(1.0);

    double gamma() const { return (alpha + beta) * (alpha + beta); }
    void validate() const;
};

/// c * eps^p.
struct PowerLaw {
    double coeff = 1.0;
    double exponent = 0.5;
    double operator()(double eps) const;
};

struct Schedule {
    PowerLaw alpha;
    PowerLaw beta;
    RhoBar rho_bar = RhoBar::finite(1.0);

    MultiscaleParams at(double eps) const;
    /// beta/alpha as eps -> 0, read off the exponents.
    RhoBar limit_ratio() const;
    /// Solves (alpha(eps) + beta(eps))^2 = gamma for eps by bisection in log eps.
    double eps_for_gamma(double gamma) const;
};

struct RhoConsistencyReport {
    std::vector<double> eps;
    std::vector<double> ratio;  // beta/alpha at each eps
    RhoBar limit = RhoBar::finite(0.0);
    bool passed = false;
    std::string note;
};

/// Compares the declared rho-bar with the limit of beta/alpha implied by the laws.
RhoConsistencyReport check_rho_consistency(const Schedule& s, const std::vector<double>& eps_list,
                                           double tolerance = 1e-9);

struct FieldTrajectory {
    std::vector<double> times;
    std::vector<Field> states;
    std::uint64_t seed = 0;
    std::uint64_t stream = 0;
};

struct ScalarTrajectory {
    std::vector<double> times;
    std::vector<double> values;
};

/// Deterministic forcing weights of the controlled SPDE; default alpha/sqrt(gamma), beta/sqrt(gamma).
struct ControlWeights {
    double interior = 0.0;
    double boundary = 0.0;
    static ControlWeights from(const MultiscaleParams& p);
};

struct SpdeSystem {
    std::shared_ptr<const SpectralOperator> op;
    CoefficientSet cs;
    CovarianceSpectrumQ q;
    CovarianceSpectrumB b;
    double delta0 = 1.0;
};

/// One exponential-Euler step of the mild solution. Immutable and shareable;
/// randomness comes from the (rng, step) key only.
class SpdeStepper {
public:
    SpdeStepper(const SpdeSystem& sys, const MultiscaleParams& params, double dt);

    /// Optional deterministic control forcing, evaluated at the step midpoint.
    void set_control(const ControlPath* control, ControlWeights weights);
    /// Turns the Wiener forcing on or off (on by default).
    void set_noise(bool on) { noise_on_ = on; }

    double dt() const { return dt_; }
    const SpectralOperator& op() const { return *sys_.op; }

    /// Advances u from t to t + dt in place.
    void step(Field& u, double t, std::uint64_t step_index, const RngStream& rng) const;

private:
    Eigen::VectorXd g_coupled(const Eigen::VectorXd& z, double t, const Field& u) const;

    SpdeSystem sys_;
    MultiscaleParams params_;
    double dt_;
    OuFactors ou_;
    Eigen::Matrix<double, Eigen::Dynamic, 2> b_coupling_;
    Eigen::VectorXd lambdas_;
    bool g_constant_;
    double g_value_ = 1.0;
    bool noise_on_ = true;
    const ControlPath* control_ = nullptr;
    ControlWeights weights_;
};

/// Throws DivergedError if any coefficient is non-finite or exceeds 1e12.
void check_finite(const Field& u, std::uint64_t step, double t);

inline constexpr double kDivergenceThreshold = 1e12;

/// Uniform grid on [0, T] with ceil(T/dt - 1e-9) steps, so the step never
/// exceeds dt and the last node is exactly T.
std::vector<double> time_grid(double T, double dt);

struct SolveOptions {
    std::size_t record_every = 1;
    bool noise = true;
};

FieldTrajectory solve_spde(const SpdeSystem& sys, const MultiscaleParams& params, const Field& x, double T,
                           double dt, const RngStream& rng, SolveOptions opts = {});

FieldTrajectory solve_controlled_spde(const SpdeSystem& sys, const MultiscaleParams& params, const Field& x,
                                      double T, double dt, const RngStream& rng, const ControlPath& control,
                                      std::optional<ControlWeights> weights = std::nullopt,
                                      SolveOptions opts = {});

ScalarTrajectory solve_limit_ode(const AveragedModel& model, double x_mean, double T, double dt);

ScalarTrajectory solve_averaged_sde(const AveragedModel& model, double gamma_scale, double x_mean, double T,
                                    double dt, const RngStream& rng);

/// RK4 on each control interval; dt is shrunk so every interval is split evenly.
ScalarTrajectory solve_controlled_ode(const AveragedModel& model, double x_mean, const ControlPath& control,
                                      double dt);

/// sup over recorded times t >= delta of |u(t) - u_ref(t)|_{H_mu}, with the
/// scalar reference embedded as a constant field.
double averaging_error(const SpectralOperator& op, const FieldTrajectory& traj, const ScalarTrajectory& ref,
                       double delta);

void write_csv(const std::filesystem::path& path, const FieldTrajectory& traj);
void write_csv(const std::filesystem::path& path, const ScalarTrajectory& traj);

}  // namespace fastexit
