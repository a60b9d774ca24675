#pragma once

// Convex exit domains D = {h : integral of g(h) < r}, first-exit detection
// and the Monte Carlo estimate of gamma * log E[tau].

#include "fastexit/coefficients.hpp"
#include "fastexit/ldp.hpp"
#include "fastexit/solver.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace fastexit {

enum class ProfileKind { square, quadratic, logcosh_quadratic };

/// Convex C^2 profile with quadratic growth.
///   square             s^2
///   quadratic          a s^2 + b s + c            (a > 0)
///   logcosh_quadratic  a log cosh(s) + b s^2      (a >= 0, b > 0)
struct ConvexProfile {
    ProfileKind kind = ProfileKind::square;
    double a = 1.0;
    double b = 0.0;
    double c = 0.0;

    static ConvexProfile square() { return {}; }
    static ConvexProfile quadratic(double a, double b, double c);
    static ConvexProfile logcosh_quadratic(double a, double b);

    double operator()(double s) const;
    std::string name() const;
};

struct DomainProbeReport {
    std::size_t samples = 0;
    double worst_semigroup_margin = 0.0;  // min over samples of G(x) - G(e^{tA} x)
    bool semigroup_monotone = true;
    std::size_t jensen_checked = 0;
    bool jensen_ok = true;
    bool passed() const { return semigroup_monotone && jensen_ok; }
};

struct DomainSpec {
    ConvexProfile profile;
    double r = 0.0;
    double domain_length = 1.0;
    double y1 = 0.0;  // constant section (y1, y2)
    double y2 = 0.0;
    DomainProbeReport probes;

    /// G(h) = integral over O of g(h(xi)).
    double membership(const SpectralOperator& op, const Field& h) const;
    bool contains(const SpectralOperator& op, const Field& h) const { return membership(op, h) < r; }
    /// Radius used for exit-location statistics: max(|y1|, |y2|).
    double section_radius() const { return std::max(-y1, y2); }
};

struct ProbeSettings {
    std::size_t samples = 100;
    std::vector<double> times{0.01, 0.1, 1.0};
    std::uint64_t seed = 12345;
    double tolerance = 1e-12;
};

/// Requires r > |O| g(0). Solves the constant section by bisection and runs the probes.
DomainSpec build_domain(const ConvexProfile& g, double r, const SpectralOperator& op, ProbeSettings probes = {});

DomainProbeReport probe_domain(const DomainSpec& dom, const SpectralOperator& op, const ProbeSettings& settings);

struct ExitEvent {
    double tau = 0.0;
    bool censored = false;
    Field boundary_state;
};

/// First crossing of G(u) = r, refined by linear interpolation of G.
/// Censored (tau = last time) when the trajectory never leaves.
ExitEvent first_exit_time(const FieldTrajectory& traj, const DomainSpec& dom, const SpectralOperator& op);

struct ExitStats {
    double gamma = 0.0;
    double eps = 0.0;
    double alpha = 0.0;
    double beta = 0.0;
    std::size_t n = 0;
    std::size_t censored = 0;
    std::size_t diverged = 0;
    double t_max = 0.0;
    std::vector<double> samples;
    std::vector<std::uint8_t> censored_flags;
    double mean_tau = 0.0;
    double log_mean_tau = 0.0;
    double gamma_log_mean = 0.0;
    double eps_log_mean = 0.0;
    double ci_halfwidth = 0.0;      // 95% half-width on gamma * log mean, delta method
    double log_ci_halfwidth = 0.0;  // same on log mean
    bool lower_bound_only = false;
    double concentration = 0.0;     // share of exits with small non-constant part
    double mean_ball_entries = 0.0; // mean entries into B_rho before exit, if instrumented
    double v_bar_target = 0.0;
};

struct ExitMcSettings {
    double dt = 1e-3;
    std::optional<double> t_max;  // default 50 exp(V/gamma), capped
    double t_max_cap = 1e4;
    std::size_t threads = 1;
    std::uint64_t seed = 1;
    double rho_ball = 0.0;        // > 0 turns on ball-entry instrumentation
    double concentration_ratio = 0.1;
};

/// One exit path of the SPDE from x; deterministic in (rng, step).
ExitEvent simulate_exit(const SpdeStepper& stepper, const DomainSpec& dom, const Field& x, double t_max,
                        const RngStream& rng, double rho_ball = 0.0, std::size_t* ball_entries = nullptr);

/// Runs n_paths exit paths for each gamma; eps solved from the schedule.
std::vector<ExitStats> exit_time_mc(const SpdeSystem& sys, const Schedule& schedule, const DomainSpec& dom,
                                    const Field& x, const std::vector<double>& gamma_grid, std::size_t n_paths,
                                    double v_bar_target, const ExitMcSettings& settings);

/// Summary statistics of a finished sample set.
void finalize_stats(ExitStats& s);

struct LinearFit {
    double intercept = 0.0;
    double slope = 0.0;
    bool valid = false;
};

/// Least-squares line through (gamma, gamma log mean); invalid for fewer than two points.
LinearFit extrapolate_to_zero(const std::vector<ExitStats>& stats);

struct ExitHypothesisReport {
    bool g_bounded = false;
    std::string g_note;
    bool flow_contained = false;
    bool flow_attracted = false;
    std::string flow_witness;
    bool contains_origin = false;
    DomainProbeReport domain;
    bool passed() const { return g_bounded && flow_contained && flow_attracted && contains_origin && domain.passed(); }
};

struct FlowProbeSettings {
    double horizon = 20.0;
    double dt = 1e-2;
    double inset = 1e-3;              // start points at (1 - inset) * y1, y2
    double attraction_tolerance = 1e-3;
};

ExitHypothesisReport check_exit_hypotheses(const AveragedModel& model, const DomainSpec& dom,
                                           const ProbeSettings& probes = {}, const FlowProbeSettings& flow = {});

void write_exit_csv(const std::filesystem::path& path, const std::vector<ExitStats>& stats);

}  // namespace fastexit
