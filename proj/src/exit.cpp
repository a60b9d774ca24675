#include "fastexit/exit.hpp"

#include "fastexit/errors.hpp"
#include "fastexit/parallel.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <stdexcept>

namespace fastexit {

ConvexProfile ConvexProfile::quadratic(double a, double b, double c) {
    if (!(a > 0.0)) throw std::invalid_argument("quadratic profile needs a > 0");
    return {ProfileKind::quadratic, a, b, c};
}

ConvexProfile ConvexProfile::logcosh_quadratic(double a, double b) {
    if (!(a >= 0.0) || !(b > 0.0)) throw std::invalid_argument("logcosh_quadratic profile needs a >= 0, b > 0");
    return {ProfileKind::logcosh_quadratic, a, b, 0.0};
}

double ConvexProfile::operator()(double s) const {
    switch (kind) {
        case ProfileKind::square: return s * s;
        case ProfileKind::quadratic: return (a * s + b) * s + c;
        case ProfileKind::logcosh_quadratic: {
            // log cosh(s) = |s| + log1p(e^{-2|s|}) - log 2, stable for large |s|.
            const double x = std::abs(s);
            return a * (x + std::log1p(std::exp(-2.0 * x)) - std::log(2.0)) + b * s * s;
        }
    }
    return 0.0;
}

std::string ConvexProfile::name() const {
    switch (kind) {
        case ProfileKind::square: return "square";
        case ProfileKind::quadratic: return "quadratic";
        case ProfileKind::logcosh_quadratic: return "logcosh_quadratic";
    }
    return "unknown";
}

double DomainSpec::membership(const SpectralOperator& op, const Field& h) const {
    // Parseval makes the square profile exact and cheap.
    if (profile.kind == ProfileKind::square) return h.coeffs.squaredNorm();
    const Eigen::VectorXd grid = op.to_grid(h);
    double acc = 0.0;
    for (Eigen::Index i = 0; i < grid.size(); ++i) acc += op.weights()(i) * profile(grid(i));
    return acc;
}

namespace {

// Root of |O| g(y) = r on the ray from 0 in direction `sign`.
double section_end(const ConvexProfile& g, double r, double len, double sign) {
    double lo = 0.0, hi = 1.0;
    while (len * g(sign * hi) < r) {
        lo = hi;
        hi *= 2.0;
        if (hi > 1e12) throw std::invalid_argument("build_domain: level set is unbounded");
    }
    for (int it = 0; it < 200 && hi - lo > 1e-15 * hi; ++it) {
        const double mid = 0.5 * (lo + hi);
        (len * g(sign * mid) < r ? lo : hi) = mid;
    }
    return sign * 0.5 * (lo + hi);
}

}  // namespace

DomainSpec build_domain(const ConvexProfile& g, double r, const SpectralOperator& op, ProbeSettings probes) {
    const double len = op.domain_length();
    if (!(r > len * g(0.0)))
        throw std::invalid_argument("build_domain: r must exceed |O| g(0) so that 0 lies in D");
    DomainSpec dom;
    dom.profile = g;
    dom.r = r;
    dom.domain_length = len;
    dom.y1 = section_end(g, r, len, -1.0);
    dom.y2 = section_end(g, r, len, 1.0);
    dom.probes = probe_domain(dom, op, probes);
    return dom;
}

DomainProbeReport probe_domain(const DomainSpec& dom, const SpectralOperator& op, const ProbeSettings& settings) {
    DomainProbeReport rep;
    RngStream rng(settings.seed, 0);
    const auto n = static_cast<Eigen::Index>(op.n_modes());
    const double scale = 1.5 * dom.section_radius();
    rep.worst_semigroup_margin = std::numeric_limits<double>::infinity();
    for (std::size_t s = 0; s < settings.samples; ++s) {
        Eigen::VectorXd dir(n);
        for (Eigen::Index k = 0; k < n; ++k) dir(k) = rng.normal(s, static_cast<std::uint32_t>(k));
        const double radius = scale * rng.uniform(s, static_cast<std::uint32_t>(n));
        const Field x(radius * dir / dir.norm());
        const double gx = dom.membership(op, x);
        for (double t : settings.times) {
            const double margin = gx - dom.membership(op, semigroup_apply(op, t, x));
            rep.worst_semigroup_margin = std::min(rep.worst_semigroup_margin, margin);
            if (margin < -settings.tolerance) rep.semigroup_monotone = false;
        }
        if (gx < dom.r) {
            ++rep.jensen_checked;
            const double mean = invariant_average(op, x);
            if (!(dom.domain_length * dom.profile(mean) < dom.r)) rep.jensen_ok = false;
        }
        ++rep.samples;
    }
    return rep;
}

ExitEvent first_exit_time(const FieldTrajectory& traj, const DomainSpec& dom, const SpectralOperator& op) {
    if (traj.states.empty()) throw std::invalid_argument("first_exit_time: empty trajectory");
    double g_prev = dom.membership(op, traj.states[0]);
    if (!(g_prev < dom.r)) throw std::invalid_argument("first_exit_time: trajectory starts outside D");
    for (std::size_t i = 1; i < traj.states.size(); ++i) {
        const double g = dom.membership(op, traj.states[i]);
        if (g >= dom.r) {
            const double w = (dom.r - g_prev) / (g - g_prev);
            ExitEvent ev;
            ev.tau = traj.times[i - 1] + w * (traj.times[i] - traj.times[i - 1]);
            ev.boundary_state = Field((1.0 - w) * traj.states[i - 1].coeffs + w * traj.states[i].coeffs);
            return ev;
        }
        g_prev = g;
    }
    return {traj.times.back(), true, traj.states.back()};
}

ExitEvent simulate_exit(const SpdeStepper& stepper, const DomainSpec& dom, const Field& x, double t_max,
                        const RngStream& rng, double rho_ball, std::size_t* ball_entries) {
    const auto& op = stepper.op();
    Field u = x;
    double g_prev = dom.membership(op, u);
    if (!(g_prev < dom.r)) throw std::invalid_argument("simulate_exit: start outside D");
    const double dt = stepper.dt();
    const auto n_steps = static_cast<std::uint64_t>(std::ceil(t_max / dt - 1e-9));
    bool in_ball = rho_ball > 0.0 && u.h_norm() < rho_ball;
    std::size_t entries = 0;
    for (std::uint64_t i = 0; i < n_steps; ++i) {
        const double t = static_cast<double>(i) * dt;
        Field prev = u;
        stepper.step(u, t, i, rng);
        check_finite(u, i, t + dt);
        const double g = dom.membership(op, u);
        if (g >= dom.r) {
            const double w = (dom.r - g_prev) / (g - g_prev);
            if (ball_entries) *ball_entries = entries;
            return {t + w * dt, false, Field((1.0 - w) * prev.coeffs + w * u.coeffs)};
        }
        if (rho_ball > 0.0) {
            const bool now = u.h_norm() < rho_ball;
            if (now && !in_ball) ++entries;
            in_ball = now;
        }
        g_prev = g;
    }
    if (ball_entries) *ball_entries = entries;
    return {static_cast<double>(n_steps) * dt, true, u};
}

void finalize_stats(ExitStats& s) {
    s.n = s.samples.size();
    if (s.n == 0) throw std::logic_error("finalize_stats: no samples");
    double sum = 0.0;
    for (double v : s.samples) sum += v;
    s.mean_tau = sum / static_cast<double>(s.n);
    double ss = 0.0;
    for (double v : s.samples) ss += (v - s.mean_tau) * (v - s.mean_tau);
    const double sd = s.n > 1 ? std::sqrt(ss / static_cast<double>(s.n - 1)) : 0.0;
    s.log_mean_tau = std::log(s.mean_tau);
    s.gamma_log_mean = s.gamma * s.log_mean_tau;
    s.eps_log_mean = s.eps * s.log_mean_tau;
    s.log_ci_halfwidth = 1.96 * sd / (std::sqrt(static_cast<double>(s.n)) * s.mean_tau);
    s.ci_halfwidth = s.gamma * s.log_ci_halfwidth;
    s.lower_bound_only = s.censored > 0;
}

std::vector<ExitStats> exit_time_mc(const SpdeSystem& sys, const Schedule& schedule, const DomainSpec& dom,
                                    const Field& x, const std::vector<double>& gamma_grid, std::size_t n_paths,
                                    double v_bar_target, const ExitMcSettings& settings) {
    if (n_paths == 0) throw std::invalid_argument("exit_time_mc: n_paths must be > 0");
    if (!dom.contains(*sys.op, x)) throw std::invalid_argument("exit_time_mc: start outside D");
    std::vector<ExitStats> out;
    for (std::size_t level = 0; level < gamma_grid.size(); ++level) {
        const double gamma = gamma_grid[level];
        const double eps = schedule.eps_for_gamma(gamma);
        const MultiscaleParams params = schedule.at(eps);
        const SpdeStepper stepper(sys, params, settings.dt);

        ExitStats st;
        st.gamma = params.gamma();
        st.eps = eps;
        st.alpha = params.alpha;
        st.beta = params.beta;
        st.v_bar_target = v_bar_target;
        st.t_max = settings.t_max.value_or(std::min(50.0 * std::exp(v_bar_target / gamma), settings.t_max_cap));

        std::vector<ExitEvent> events(n_paths);
        std::vector<std::uint8_t> diverged(n_paths, 0);
        std::vector<std::size_t> entries(n_paths, 0);
        parallel_for(n_paths, settings.threads, [&](std::size_t p) {
            const RngStream rng(settings.seed, static_cast<std::uint64_t>(p) + (static_cast<std::uint64_t>(level) << 32));
            try {
                events[p] = simulate_exit(stepper, dom, x, st.t_max, rng, settings.rho_ball, &entries[p]);
            } catch (const DivergedError&) {
                events[p] = {st.t_max, true, x};
                diverged[p] = 1;
            }
        });

        const double radius = dom.section_radius();
        std::size_t concentrated = 0, exited = 0;
        double entry_sum = 0.0;
        for (std::size_t p = 0; p < n_paths; ++p) {
            const auto& ev = events[p];
            st.samples.push_back(ev.censored ? st.t_max : ev.tau);
            st.censored_flags.push_back(ev.censored ? 1 : 0);
            if (ev.censored) ++st.censored;
            if (diverged[p]) ++st.diverged;
            entry_sum += static_cast<double>(entries[p]);
            if (!ev.censored) {
                ++exited;
                const auto& c = ev.boundary_state.coeffs;
                const double nonconst = std::sqrt(std::max(0.0, c.squaredNorm() - c(0) * c(0)));
                if (nonconst < settings.concentration_ratio * radius) ++concentrated;
            }
        }
        st.concentration = exited ? static_cast<double>(concentrated) / static_cast<double>(exited) : 0.0;
        st.mean_ball_entries = entry_sum / static_cast<double>(n_paths);
        finalize_stats(st);
        out.push_back(std::move(st));
    }
    return out;
}

LinearFit extrapolate_to_zero(const std::vector<ExitStats>& stats) {
    LinearFit fit;
    if (stats.size() < 2) return fit;
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (const auto& s : stats) {
        sx += s.gamma;
        sy += s.gamma_log_mean;
        sxx += s.gamma * s.gamma;
        sxy += s.gamma * s.gamma_log_mean;
    }
    const double n = static_cast<double>(stats.size());
    const double den = n * sxx - sx * sx;
    if (den == 0.0) return fit;
    fit.slope = (n * sxy - sx * sy) / den;
    fit.intercept = (sy - fit.slope * sx) / n;
    fit.valid = true;
    return fit;
}

ExitHypothesisReport check_exit_hypotheses(const AveragedModel& model, const DomainSpec& dom,
                                           const ProbeSettings& probes, const FlowProbeSettings& flow) {
    ExitHypothesisReport rep;
    const auto& cs = model.coefficients();
    const auto catalog_sup = cs.g.sup_bound();
    if (!cs.g_sup_bound) {
        rep.g_note = "no g_sup_bound declared";
    } else if (!catalog_sup) {
        rep.g_note = "g law " + cs.g.name() + " is unbounded";
    } else if (*catalog_sup > *cs.g_sup_bound) {
        rep.g_note = "declared g_sup_bound is below the sup of the g law";
    } else {
        rep.g_bounded = true;
        rep.g_note = "g bounded";
    }

    rep.contains_origin = dom.domain_length * dom.profile(0.0) < dom.r;

    const double len = dom.domain_length;
    std::vector<double> starts{dom.y1 * (1.0 - flow.inset), 0.5 * dom.y1, 0.0, 0.5 * dom.y2, dom.y2 * (1.0 - flow.inset)};
    std::vector<double> finals;
    rep.flow_contained = true;
    for (double x0 : starts) {
        ScalarTrajectory traj;
        try {
            traj = solve_limit_ode(model, x0, flow.horizon, flow.dt);
        } catch (const DivergedError&) {
            rep.flow_contained = false;
            rep.flow_witness = "flow from " + std::to_string(x0) + " diverged";
            break;
        }
        for (std::size_t i = 0; i < traj.values.size(); ++i) {
            if (len * dom.profile(traj.values[i]) > dom.r * (1.0 + 1e-12)) {
                rep.flow_contained = false;
                std::ostringstream os;
                os << "flow from " << x0 << " leaves the closed domain at t = " << traj.times[i];
                rep.flow_witness = os.str();
                break;
            }
        }
        if (!rep.flow_contained) break;
        finals.push_back(traj.values.back());
    }
    if (rep.flow_contained) {
        rep.flow_attracted = true;
        const double anchor = finals[2];
        for (std::size_t i = 0; i < finals.size(); ++i)
            if (std::abs(finals[i] - anchor) > flow.attraction_tolerance) {
                rep.flow_attracted = false;
                std::ostringstream os;
                os << "flow from " << starts[i] << " ends at " << finals[i] << ", away from " << anchor;
                rep.flow_witness = os.str();
            }
    }
    rep.domain = dom.probes.samples > 0 ? dom.probes : probe_domain(dom, model.op(), probes);
    return rep;
}

void write_exit_csv(const std::filesystem::path& path, const std::vector<ExitStats>& stats) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream os(path);
    if (!os) throw std::runtime_error("cannot open " + path.string() + " for writing");
    os << std::setprecision(17);
    os << "gamma,eps,alpha,beta,n,censored,mean_tau,log_mean_tau,gamma_log_mean,ci_halfwidth,v_bar_target\n";
    for (const auto& s : stats)
        os << s.gamma << ',' << s.eps << ',' << s.alpha << ',' << s.beta << ',' << s.n << ',' << s.censored << ','
           << s.mean_tau << ',' << s.log_mean_tau << ',' << s.gamma_log_mean << ',' << s.ci_halfwidth << ','
           << s.v_bar_target << '\n';
}

}  // namespace fastexit
