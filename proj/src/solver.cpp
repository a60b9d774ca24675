#include "fastexit/solver.hpp"

#include "fastexit/errors.hpp"

#include <boost/math/tools/roots.hpp>

#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <stdexcept>

namespace fastexit {

void MultiscaleParams::validate() const {
    if (!(eps > 0.0) || !std::isfinite(eps)) throw std::invalid_argument("MultiscaleParams: eps must be > 0");
    if (!(alpha >= 0.0) || !(beta >= 0.0)) throw std::invalid_argument("MultiscaleParams: alpha, beta must be >= 0");
}

double PowerLaw::operator()(double eps) const { return coeff * std::pow(eps, exponent); }

MultiscaleParams Schedule::at(double eps) const {
    MultiscaleParams p{eps, alpha(eps), beta(eps), rho_bar};
    p.validate();
    return p;
}

RhoBar Schedule::limit_ratio() const {
    if (alpha.coeff == 0.0) return beta.coeff == 0.0 ? RhoBar::finite(0.0) : RhoBar::infinity();
    if (beta.coeff == 0.0) return RhoBar::finite(0.0);
    if (beta.exponent > alpha.exponent) return RhoBar::finite(0.0);
    if (beta.exponent < alpha.exponent) return RhoBar::infinity();
    return RhoBar::finite(beta.coeff / alpha.coeff);
}

double Schedule::eps_for_gamma(double gamma) const {
    if (!(gamma > 0.0)) throw std::invalid_argument("eps_for_gamma: gamma must be > 0");
    auto residual = [&](double log_eps) {
        const double e = std::exp(log_eps);
        const double s = alpha(e) + beta(e);
        return std::log(s * s) - std::log(gamma);
    };
    double lo = std::log(1e-300), hi = std::log(1e300);
    const double flo = residual(lo), fhi = residual(hi);
    if (!(flo < 0.0 && fhi > 0.0))
        throw std::invalid_argument("eps_for_gamma: schedule is not increasing through the requested gamma");
    boost::math::tools::eps_tolerance<double> tol(50);
    const auto [a, b] = boost::math::tools::bisect(residual, lo, hi, tol);
    return std::exp(0.5 * (a + b));
}

RhoConsistencyReport check_rho_consistency(const Schedule& s, const std::vector<double>& eps_list,
                                           double tolerance) {
    RhoConsistencyReport rep;
    rep.limit = s.limit_ratio();
    for (double e : eps_list) {
        const auto p = s.at(e);
        rep.eps.push_back(e);
        rep.ratio.push_back(p.alpha > 0.0 ? p.beta / p.alpha : std::numeric_limits<double>::infinity());
    }
    const RhoBar declared = s.rho_bar;
    if (declared.is_infinite() || rep.limit.is_infinite()) {
        rep.passed = declared.is_infinite() == rep.limit.is_infinite();
    } else {
        rep.passed = std::abs(declared.value() - rep.limit.value()) <= tolerance * std::max(1.0, declared.value());
    }
    rep.note = rep.passed ? "declared rho_bar matches the limit of beta/alpha"
                          : "declared rho_bar differs from the limit of beta/alpha";
    return rep;
}

ControlWeights ControlWeights::from(const MultiscaleParams& p) {
    const double root = p.alpha + p.beta;
    if (root == 0.0) {
        return {p.rho_bar.interior_weight(), p.rho_bar.boundary_weight()};
    }
    return {p.alpha / root, p.beta / root};
}

SpdeStepper::SpdeStepper(const SpdeSystem& sys, const MultiscaleParams& params, double dt)
    : sys_(sys), params_(params), dt_(dt), ou_(*sys.op, params.eps, dt),
      b_coupling_(boundary_coupling(*sys.op, sys.cs.sigma)), g_constant_(sys.cs.g.is_constant()) {
    params_.validate();
    if (sys_.q.size() != sys_.op->n_modes())
        throw std::invalid_argument("SpdeStepper: Q spectrum length does not match mode count");
    if (!(sys_.delta0 > 0.0)) throw std::invalid_argument("SpdeStepper: delta0 must be > 0");
    lambdas_ = Eigen::Map<const Eigen::VectorXd>(sys_.q.lambdas.data(), static_cast<Eigen::Index>(sys_.q.size()));
    if (g_constant_) g_value_ = sys_.cs.g.value;
}

void SpdeStepper::set_control(const ControlPath* control, ControlWeights weights) {
    if (control) control->validate();
    control_ = control;
    weights_ = weights;
}

Eigen::VectorXd SpdeStepper::g_coupled(const Eigen::VectorXd& z, double t, const Field& u) const {
    if (g_constant_) return g_value_ * z;
    const Eigen::VectorXd g = nemytskii_G_multiplier(*sys_.op, sys_.cs, t, u);
    const auto& E = sys_.op->basis_on_grid();
    const Eigen::VectorXd wg = (sys_.op->weights().array() * g.array()).matrix();
    return E.transpose() * (wg.asDiagonal() * (E * z));
}

void SpdeStepper::step(Field& u, double t, std::uint64_t step_index, const RngStream& rng) const {
    const auto n = static_cast<Eigen::Index>(sys_.op->n_modes());
    const Field F = nemytskii_F(*sys_.op, sys_.cs, t, u);
    Eigen::VectorXd next = (ou_.decay.array() * u.coeffs.array() + ou_.phi1_dt.array() * F.coeffs.array()).matrix();

    if (noise_on_ && params_.alpha > 0.0) {
        Eigen::VectorXd z(n);
        for (Eigen::Index j = 0; j < n; ++j)
            z(j) = lambdas_(j) * rng.normal(step_index, kInteriorSlot + static_cast<std::uint32_t>(j));
        next += params_.alpha * (g_coupled(z, t, u).array() * ou_.std_dev.array()).matrix();
    }
    if (noise_on_ && params_.beta > 0.0) {
        const Eigen::Vector2d z(sys_.b[0] * rng.normal(step_index, kBoundarySlot),
                                sys_.b[1] * rng.normal(step_index, kBoundarySlot + 1));
        next += params_.beta * ((b_coupling_ * z).array() * ou_.std_dev.array()).matrix();
    }
    if (control_) {
        const std::size_t i = control_->interval_at(t + 0.5 * dt_);
        const Eigen::VectorXd& ph = control_->phi_H[i];
        const BoundaryData& pz = control_->phi_Z[i];
        if (weights_.interior != 0.0) {
            const Eigen::VectorXd forcing = g_coupled((lambdas_.array() * ph.array()).matrix(), t, u);
            next += weights_.interior * (ou_.phi1_dt.array() * forcing.array()).matrix();
        }
        if (weights_.boundary != 0.0) {
            const Eigen::Vector2d zb(sys_.b[0] * pz[0], sys_.b[1] * pz[1]);
            next += weights_.boundary * (ou_.phi1_dt.array() * (b_coupling_ * zb).array()).matrix();
        }
    }
    u.coeffs = std::move(next);
}

void check_finite(const Field& u, std::uint64_t step, double t) {
    for (Eigen::Index k = 0; k < u.coeffs.size(); ++k) {
        const double c = u.coeffs(k);
        if (!std::isfinite(c) || std::abs(c) > kDivergenceThreshold)
            throw DivergedError(static_cast<std::size_t>(step), t,
                                "path diverged at step " + std::to_string(step) + " (t = " + std::to_string(t) +
                                    ", mode " + std::to_string(k) + ")");
    }
}

std::vector<double> time_grid(double T, double dt) {
    if (!(T > 0.0) || !(dt > 0.0) || dt > T * (1.0 + 1e-12))
        throw std::invalid_argument("time grid requires T > 0 and 0 < dt <= T");
    const auto n = static_cast<std::size_t>(std::ceil(T / dt - 1e-9));
    std::vector<double> times(n + 1);
    const double h = T / static_cast<double>(n);
    for (std::size_t i = 0; i <= n; ++i) times[i] = static_cast<double>(i) * h;
    times[n] = T;
    return times;
}

namespace {

FieldTrajectory run_stepper(const SpdeStepper& stepper, const Field& x, const std::vector<double>& times,
                            const RngStream& rng, std::size_t record_every) {
    if (record_every == 0) throw std::invalid_argument("record_every must be >= 1");
    FieldTrajectory traj;
    traj.seed = rng.seed();
    traj.stream = rng.stream();
    Field u = x;
    traj.times.push_back(times[0]);
    traj.states.push_back(u);
    const std::size_t n = times.size() - 1;
    for (std::size_t i = 0; i < n; ++i) {
        stepper.step(u, times[i], i, rng);
        check_finite(u, i, times[i + 1]);
        if ((i + 1) % record_every == 0 || i + 1 == n) {
            traj.times.push_back(times[i + 1]);
            traj.states.push_back(u);
        }
    }
    return traj;
}

}  // namespace

FieldTrajectory solve_spde(const SpdeSystem& sys, const MultiscaleParams& params, const Field& x, double T,
                           double dt, const RngStream& rng, SolveOptions opts) {
    if (x.size() != sys.op->n_modes()) throw std::invalid_argument("solve_spde: initial state has wrong length");
    const auto times = time_grid(T, dt);
    SpdeStepper stepper(sys, params, times[1] - times[0]);
    stepper.set_noise(opts.noise);
    return run_stepper(stepper, x, times, rng, opts.record_every);
}

FieldTrajectory solve_controlled_spde(const SpdeSystem& sys, const MultiscaleParams& params, const Field& x,
                                      double T, double dt, const RngStream& rng, const ControlPath& control,
                                      std::optional<ControlWeights> weights, SolveOptions opts) {
    if (x.size() != sys.op->n_modes())
        throw std::invalid_argument("solve_controlled_spde: initial state has wrong length");
    control.validate();
    if (control.t_begin() > 0.0 || control.t_end() < T * (1.0 - 1e-12))
        throw std::invalid_argument("solve_controlled_spde: control does not cover [0, T]");
    const auto times = time_grid(T, dt);
    SpdeStepper stepper(sys, params, times[1] - times[0]);
    stepper.set_noise(opts.noise);
    stepper.set_control(&control, weights.value_or(ControlWeights::from(params)));
    return run_stepper(stepper, x, times, rng, opts.record_every);
}

namespace {

void check_scalar(double u, std::size_t step, double t) {
    if (!std::isfinite(u) || std::abs(u) > kDivergenceThreshold)
        throw DivergedError(step, t, "scalar path diverged at step " + std::to_string(step));
}

template <class Rhs>
double rk4(const Rhs& f, double t, double u, double h) {
    const double k1 = f(t, u);
    const double k2 = f(t + 0.5 * h, u + 0.5 * h * k1);
    const double k3 = f(t + 0.5 * h, u + 0.5 * h * k2);
    const double k4 = f(t + h, u + h * k3);
    return u + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

}  // namespace

ScalarTrajectory solve_limit_ode(const AveragedModel& model, double x_mean, double T, double dt) {
    ScalarTrajectory out;
    out.times = time_grid(T, dt);
    out.values.resize(out.times.size());
    out.values[0] = x_mean;
    auto rhs = [&](double t, double u) { return model.F_bar(t, u); };
    for (std::size_t i = 0; i + 1 < out.times.size(); ++i) {
        const double h = out.times[i + 1] - out.times[i];
        out.values[i + 1] = rk4(rhs, out.times[i], out.values[i], h);
        check_scalar(out.values[i + 1], i, out.times[i + 1]);
    }
    return out;
}

ScalarTrajectory solve_averaged_sde(const AveragedModel& model, double gamma_scale, double x_mean, double T,
                                    double dt, const RngStream& rng) {
    if (!(gamma_scale >= 0.0)) throw std::invalid_argument("solve_averaged_sde: gamma_scale must be >= 0");
    ScalarTrajectory out;
    out.times = time_grid(T, dt);
    out.values.resize(out.times.size());
    out.values[0] = x_mean;
    for (std::size_t i = 0; i + 1 < out.times.size(); ++i) {
        const double t = out.times[i];
        const double h = out.times[i + 1] - t;
        const double u = out.values[i];
        const double H = model.H(t, u);
        if (H < 0.0) throw std::logic_error("solve_averaged_sde: negative noise intensity");
        const double dw = gamma_scale > 0.0 ? std::sqrt(h) * rng.normal(i, 0) : 0.0;
        out.values[i + 1] = u + h * model.F_bar(t, u) + std::sqrt(gamma_scale * H) * dw;
        check_scalar(out.values[i + 1], i, out.times[i + 1]);
    }
    return out;
}

ScalarTrajectory solve_controlled_ode(const AveragedModel& model, double x_mean, const ControlPath& control,
                                      double dt) {
    control.validate();
    if (!(dt > 0.0)) throw std::invalid_argument("solve_controlled_ode: dt must be > 0");
    const double a = model.rho_bar().interior_weight();
    const double b = model.rho_bar().boundary_weight();
    const BoundaryData sig = model.Sigma_row(0.0);

    ScalarTrajectory out;
    out.times.push_back(control.times[0]);
    out.values.push_back(x_mean);
    double u = x_mean;
    std::size_t step = 0;
    for (std::size_t i = 0; i < control.n_intervals(); ++i) {
        const double t0 = control.times[i];
        const double width = control.times[i + 1] - t0;
        const auto m = std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(width / dt - 1e-9)));
        const double h = width / static_cast<double>(m);
        const Eigen::VectorXd& ph = control.phi_H[i];
        const double boundary_term = b * control.phi_Z[i].dot(sig);
        auto rhs = [&](double t, double v) {
            double r = model.F_bar(t, v) + boundary_term;
            if (a > 0.0) r += a * ph.dot(model.G_row(t, v));
            return r;
        };
        for (std::size_t s = 0; s < m; ++s) {
            const double t = t0 + static_cast<double>(s) * h;
            u = rk4(rhs, t, u, h);
            check_scalar(u, step++, t + h);
            out.times.push_back(s + 1 == m ? control.times[i + 1] : t + h);
            out.values.push_back(u);
        }
    }
    return out;
}

double averaging_error(const SpectralOperator& op, const FieldTrajectory& traj, const ScalarTrajectory& ref,
                       double delta) {
    if (traj.times.size() != ref.times.size())
        throw std::invalid_argument("averaging_error: trajectory and reference grids differ in length");
    if (traj.times.empty()) throw std::invalid_argument("averaging_error: empty trajectory");
    if (!(delta >= 0.0) || delta >= traj.times.back())
        throw std::invalid_argument("averaging_error: delta must lie in [0, T)");
    double worst = 0.0;
    for (std::size_t i = 0; i < traj.times.size(); ++i) {
        if (std::abs(traj.times[i] - ref.times[i]) > 1e-9 * std::max(1.0, std::abs(traj.times[i])))
            throw std::invalid_argument("averaging_error: trajectory and reference grids differ");
        if (traj.times[i] < delta - 1e-12) continue;
        Field diff = traj.states[i];
        diff.coeffs -= op.constant_field(ref.values[i]).coeffs;
        worst = std::max(worst, op.h_mu_norm(diff));
    }
    return worst;
}

namespace {

std::ofstream open_csv(const std::filesystem::path& path) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream os(path);
    if (!os) throw std::runtime_error("cannot open " + path.string() + " for writing");
    os << std::setprecision(17);
    return os;
}

}  // namespace

void write_csv(const std::filesystem::path& path, const FieldTrajectory& traj) {
    auto os = open_csv(path);
    os << "t";
    const std::size_t n = traj.states.empty() ? 0 : traj.states.front().size();
    for (std::size_t k = 0; k < n; ++k) os << ",mode_" << k;
    os << '\n';
    for (std::size_t i = 0; i < traj.times.size(); ++i) {
        os << traj.times[i];
        for (std::size_t k = 0; k < n; ++k) os << ',' << traj.states[i].coeffs(static_cast<Eigen::Index>(k));
        os << '\n';
    }
}

void write_csv(const std::filesystem::path& path, const ScalarTrajectory& traj) {
    auto os = open_csv(path);
    os << "t,value\n";
    for (std::size_t i = 0; i < traj.times.size(); ++i) os << traj.times[i] << ',' << traj.values[i] << '\n';
}

}  // namespace fastexit
