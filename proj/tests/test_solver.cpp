#include "fastexit/errors.hpp"
#include "fastexit/solver.hpp"

#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <memory>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

using namespace fastexit;
using std::numbers::pi;

namespace {

SpdeSystem make_system(std::size_t n, ScalarLaw f, double lambda = 1.0, BoundaryData thetas = {{1.0, 1.0}}) {
    SpdeSystem sys;
    sys.op = std::make_shared<const SpectralOperator>(build_neumann_laplacian_1d(n));
    sys.cs.f = f;
    sys.q = CovarianceSpectrumQ::flat(n, lambda);
    sys.b = CovarianceSpectrumB(thetas);
    return sys;
}

AveragedModel model_of(const SpdeSystem& sys, RhoBar rho) {
    return AveragedModel(sys.op, sys.cs, sys.q, sys.b, rho, sys.delta0);
}

double mean_of(const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
}

double var_of(const std::vector<double>& v) {
    const double m = mean_of(v);
    double s = 0.0;
    for (double x : v) s += (x - m) * (x - m);
    return s / static_cast<double>(v.size() - 1);
}

}  // namespace

TEST_CASE("time grid") {
    const auto g = time_grid(1.0, 0.1);
    CHECK(g.size() == 11);
    CHECK(g.back() == 1.0);
    const auto h = time_grid(1.0, 0.3);
    CHECK(h.size() == 5);
    CHECK(h[1] == doctest::Approx(0.25));
    CHECK_THROWS_AS(time_grid(1.0, 0.0), std::invalid_argument);
    CHECK_THROWS_AS(time_grid(1.0, 2.0), std::invalid_argument);
}

TEST_CASE("schedules: power laws, limit ratio, gamma inversion") {
    Schedule s{{0.5, 0.25}, {0.5, 0.25}, RhoBar::finite(1.0)};
    const auto p = s.at(1e-4);
    CHECK(p.alpha == doctest::Approx(0.05));
    CHECK(p.gamma() == doctest::Approx(0.01));
    CHECK(s.limit_ratio().value() == doctest::Approx(1.0));
    for (double gamma : {0.1, 0.02, 1e-3}) {
        const double eps = s.eps_for_gamma(gamma);
        CHECK(s.at(eps).gamma() == doctest::Approx(gamma).epsilon(1e-10));
        CHECK(eps == doctest::Approx(gamma * gamma).epsilon(1e-10));
    }
    Schedule inf{{1.0, 0.5}, {1.0, 0.25}, RhoBar::infinity()};
    CHECK(inf.limit_ratio().is_infinite());
    Schedule zero{{1.0, 0.25}, {1.0, 0.5}, RhoBar::finite(0.0)};
    CHECK(zero.limit_ratio().value() == 0.0);
    Schedule flat{{0.0, 0.0}, {0.0, 0.0}, RhoBar::finite(0.0)};
    CHECK_THROWS_AS(flat.eps_for_gamma(0.1), std::invalid_argument);
}

TEST_CASE("rho-bar consistency") {
    CHECK(check_rho_consistency({{1.0, 0.5}, {2.0, 0.5}, RhoBar::finite(2.0)}, {0.1, 0.01}).passed);
    CHECK(!check_rho_consistency({{1.0, 0.5}, {2.0, 0.5}, RhoBar::finite(1.0)}, {0.1, 0.01}).passed);
    CHECK(check_rho_consistency({{1.0, 0.5}, {1.0, 0.25}, RhoBar::infinity()}, {0.1}).passed);
    CHECK(!check_rho_consistency({{1.0, 0.5}, {1.0, 0.25}, RhoBar::finite(5.0)}, {0.1}).passed);
    const auto rep = check_rho_consistency({{1.0, 0.5}, {2.0, 0.5}, RhoBar::finite(2.0)}, {0.1, 0.01});
    CHECK(rep.ratio[1] == doctest::Approx(2.0));
}

TEST_CASE("control weights") {
    const auto w = ControlWeights::from({0.01, 0.3, 0.1, RhoBar::finite(1.0)});
    CHECK(w.interior == doctest::Approx(0.75));
    CHECK(w.boundary == doctest::Approx(0.25));
    const auto z = ControlWeights::from({0.01, 0.0, 0.0, RhoBar::finite(3.0)});
    CHECK(z.interior == doctest::Approx(0.25));
    CHECK(z.boundary == doctest::Approx(0.75));
}

TEST_CASE("deterministic SPDE: non-constant modes decay exactly") {
    auto sys = make_system(6, ScalarLaw::constant(0.0));
    Field x = Field::zero(6);
    x.coeffs(1) = 1.0;
    x.coeffs(3) = -0.5;
    const double eps = 0.2;
    const auto tr = solve_spde(sys, {eps, 0.0, 0.0, RhoBar::finite(1.0)}, x, 0.1, 0.01, RngStream(0, 0));
    const auto& u = tr.states.back();
    CHECK(u.coeffs(1) == doctest::Approx(std::exp(-pi * pi * 0.1 / eps)).epsilon(1e-12));
    CHECK(u.coeffs(3) == doctest::Approx(-0.5 * std::exp(-9 * pi * pi * 0.1 / eps)).epsilon(1e-10));
    CHECK(u.coeffs(0) == 0.0);
}

TEST_CASE("deterministic SPDE: constant initial datum under linear decay follows c e^{-t} to O(dt)") {
    auto sys = make_system(6, ScalarLaw::linear(-1.0));
    const Field x = sys.op->constant_field(2.0);
    double prev_err = 0.0;
    for (double dt : {0.02, 0.01, 0.005}) {
        const auto tr = solve_spde(sys, {0.1, 0.0, 0.0, RhoBar::finite(1.0)}, x, 1.0, dt, RngStream(0, 0));
        const double err = std::abs(tr.states.back().coeffs(0) - 2.0 * std::exp(-1.0));
        CHECK(err < 2.0 * dt);
        if (prev_err > 0.0) CHECK(err / prev_err == doctest::Approx(0.5).epsilon(0.05));
        prev_err = err;
        CHECK(tr.states.back().coeffs.tail(5).norm() < 1e-12);
    }
}

TEST_CASE("record_every thins the stored trajectory and keeps the endpoint") {
    auto sys = make_system(4, ScalarLaw::linear(-1.0));
    SolveOptions o;
    o.record_every = 3;
    const auto tr = solve_spde(sys, {0.1, 0.0, 0.0, RhoBar::finite(1.0)}, Field::unit(4, 0), 1.0, 0.1,
                               RngStream(0, 0), o);
    CHECK(tr.times.size() == 5);
    CHECK(tr.times.back() == 1.0);
}

TEST_CASE("stochastic SPDE: same key, same path; different stream, different path") {
    auto sys = make_system(8, ScalarLaw::linear(-1.0));
    const MultiscaleParams p{0.01, 0.1, 0.1, RhoBar::finite(1.0)};
    const auto a = solve_spde(sys, p, Field::unit(8, 0), 0.2, 0.001, RngStream(4, 2));
    const auto b = solve_spde(sys, p, Field::unit(8, 0), 0.2, 0.001, RngStream(4, 2));
    const auto c = solve_spde(sys, p, Field::unit(8, 0), 0.2, 0.001, RngStream(4, 3));
    CHECK((a.states.back().coeffs - b.states.back().coeffs).norm() == 0.0);
    CHECK((a.states.back().coeffs - c.states.back().coeffs).norm() > 0.0);
}

TEST_CASE("stochastic SPDE: constant-mode variance matches the additive OU formula") {
    // Mode 0 obeys dc = -c dt + alpha lambda dW_0 + beta (theta_0 dZ_0 + theta_1 dZ_1):
    // Var c(T) = (alpha^2 + 2 beta^2)(1 - e^{-2T})/2 for unit spectra.
    auto sys = make_system(4, ScalarLaw::linear(-1.0));
    const MultiscaleParams p{0.01, 0.3, 0.2, RhoBar::finite(1.0)};
    std::vector<double> c;
    for (std::uint64_t s = 0; s < 4000; ++s)
        c.push_back(solve_spde(sys, p, Field::zero(4), 1.0, 0.01, RngStream(6, s)).states.back().coeffs(0));
    const double expect = (0.09 + 2 * 0.04) * (1 - std::exp(-2.0)) / 2;
    CHECK(std::abs(mean_of(c)) < 4 * std::sqrt(expect / 4000));
    CHECK(var_of(c) == doctest::Approx(expect).epsilon(0.08));
}

TEST_CASE("divergence raises DivergedError with step and time") {
    auto sys = make_system(4, ScalarLaw::linear(50.0));
    try {
        solve_spde(sys, {0.1, 0.0, 0.0, RhoBar::finite(1.0)}, Field::unit(4, 0), 10.0, 0.1, RngStream(0, 0));
        FAIL("expected divergence");
    } catch (const DivergedError& e) {
        CHECK(e.time() > 0.0);
        CHECK(e.time() <= 10.0);
    }
}

TEST_CASE("limit ODE: RK4 reproduces e^{-1}") {
    auto sys = make_system(4, ScalarLaw::linear(-1.0));
    const auto m = model_of(sys, RhoBar::finite(1.0));
    const auto tr = solve_limit_ode(m, 1.0, 1.0, 0.01);
    CHECK(tr.values.back() == doctest::Approx(std::exp(-1.0)).epsilon(1e-9));
}

TEST_CASE("limit ODE with source settles at 2/pi") {
    auto sys = make_system(16, ScalarLaw::linear_plus_source(-1.0, 1.0));
    const auto m = model_of(sys, RhoBar::finite(1.0));
    const auto tr = solve_limit_ode(m, 0.0, 20.0, 0.01);
    CHECK(tr.values.back() == doctest::Approx(2.0 / pi).epsilon(1e-8));
}

TEST_CASE("averaged SDE: OU moments and zero-noise reduction") {
    auto sys = make_system(4, ScalarLaw::linear(-1.0));
    const auto m = model_of(sys, RhoBar::finite(1.0));  // H = 0.75
    const double gamma = 0.2;
    std::vector<double> end;
    for (std::uint64_t s = 0; s < 4000; ++s)
        end.push_back(solve_averaged_sde(m, gamma, 1.0, 1.0, 0.01, RngStream(2, s)).values.back());
    CHECK(mean_of(end) == doctest::Approx(std::exp(-1.0)).epsilon(0.03));
    CHECK(var_of(end) == doctest::Approx(gamma * 0.75 * (1 - std::exp(-2.0)) / 2).epsilon(0.08));
    const auto det = solve_averaged_sde(m, 0.0, 1.0, 1.0, 0.001, RngStream(0, 0));
    CHECK(det.values.back() == doctest::Approx(std::exp(-1.0)).epsilon(1e-3));
}

TEST_CASE("controlled ODE: zero control is the limit ODE, constant control shifts the fixed point") {
    auto sys = make_system(4, ScalarLaw::linear(-1.0));
    const auto m = model_of(sys, RhoBar::finite(1.0));
    const auto times = time_grid(1.0, 0.1);
    const auto zero = solve_controlled_ode(m, 1.0, ControlPath::zero(times, 4), 0.01);
    CHECK(zero.values.back() == doctest::Approx(solve_limit_ode(m, 1.0, 1.0, 0.01).values.back()).epsilon(1e-12));

    // w' = -w + a phi_H0 lambda_0 + b (phi_Z . Sigma); with a = b = 1/2, phi_H0 = 2, phi_Z = (1, 1): w' = -w + 2
    auto ctl = ControlPath::zero(time_grid(8.0, 0.5), 4);
    for (auto& ph : ctl.phi_H) ph(0) = 2.0;
    for (auto& pz : ctl.phi_Z) pz = {{1.0, 1.0}};
    const auto tr = solve_controlled_ode(m, 0.0, ctl, 0.01);
    CHECK(tr.values.back() == doctest::Approx(2.0 * (1 - std::exp(-8.0))).epsilon(1e-8));
}

TEST_CASE("controlled SPDE tracks the controlled ODE as eps -> 0") {
    auto sys = make_system(8, ScalarLaw::linear(-1.0));
    const auto m = model_of(sys, RhoBar::finite(1.0));
    auto ctl = ControlPath::zero(time_grid(1.0, 0.125), 8);
    for (std::size_t i = 0; i < ctl.n_intervals(); ++i) {
        ctl.phi_H[i](0) = std::sin(static_cast<double>(i));
        ctl.phi_H[i](2) = 3.0;  // no effect on the mean when g is constant
        ctl.phi_Z[i] = {{1.0, -0.5}};
    }
    const auto ode = solve_controlled_ode(m, 0.5, ctl, 0.001);
    const Schedule s{{1.0, 0.5}, {1.0, 0.5}, RhoBar::finite(1.0)};
    double prev = 1e9;
    for (double eps : {1e-2, 1e-4}) {
        const auto tr = solve_controlled_spde(sys, s.at(eps), sys.op->constant_field(0.5), 1.0, 0.001,
                                              RngStream(3, 0), ctl);
        const double err = averaging_error(*sys.op, tr, ode, 0.2);
        CHECK(err < prev);
        prev = err;
    }
    CHECK(prev < 0.05);
}

TEST_CASE("averaging error is zero against itself") {
    auto sys = make_system(4, ScalarLaw::linear(-1.0));
    const auto m = model_of(sys, RhoBar::finite(1.0));
    const auto tr = solve_spde(sys, {0.1, 0.0, 0.0, RhoBar::finite(1.0)}, sys.op->constant_field(1.0), 1.0, 0.01,
                               RngStream(0, 0));
    const auto ode = solve_limit_ode(m, 1.0, 1.0, 0.01);
    CHECK(averaging_error(*sys.op, tr, ode, 0.0) < 0.01);
    CHECK_THROWS_AS(averaging_error(*sys.op, tr, ode, 1.0), std::invalid_argument);
}

TEST_CASE("trajectory CSV layout") {
    auto sys = make_system(3, ScalarLaw::linear(-1.0));
    const auto tr = solve_spde(sys, {0.1, 0.0, 0.0, RhoBar::finite(1.0)}, Field::unit(3, 0), 0.2, 0.1,
                               RngStream(0, 0));
    const auto path = std::filesystem::temp_directory_path() / "fastexit_test_traj.csv";
    write_csv(path, tr);
    std::ifstream is(path);
    std::string header;
    std::getline(is, header);
    CHECK(header == "t,mode_0,mode_1,mode_2");
    std::filesystem::remove(path);
}

TEST_CASE("deterministic SPDE: zero-mean data collapse at the spectral-gap rate") {
    auto sys = make_system(8, ScalarLaw::constant(0.0));
    Field x = Field::zero(8);
    x.coeffs << 0.0, 1.0, 0.5, -0.3, 0.0, 0.2, 0.0, 0.1;
    const double eps = 1e-3;
    const auto tr = solve_spde(sys, {eps, 0.0, 0.0, RhoBar::finite(1.0)}, x, 0.02, 0.001, RngStream(0, 0));
    for (std::size_t i = 0; i < tr.times.size(); ++i) {
        const double bound = std::exp(-pi * pi * tr.times[i] / eps) * x.h_norm();
        CHECK(sys.op->h_mu_norm(tr.states[i]) <= bound * (1 + 1e-12));
        if (tr.times[i] >= 0.01 - 1e-12) CHECK(sys.op->h_mu_norm(tr.states[i]) < 1e-40);
    }
}

TEST_CASE("constant mode of a linear law follows the scalar recursion exactly") {
    auto sys = make_system(6, ScalarLaw::linear(-0.7, 0.3));
    const double dt = 0.01;
    const auto tr = solve_spde(sys, {0.05, 0.0, 0.0, RhoBar::finite(1.0)}, sys.op->constant_field(1.5), 0.5, dt,
                               RngStream(0, 0));
    double c = 1.5;
    for (std::size_t i = 1; i < tr.times.size(); ++i) {
        c = c + dt * (-0.7 * c + 0.3);
        CHECK(tr.states[i].coeffs(0) == doctest::Approx(c).epsilon(1e-14));
    }
}

TEST_CASE("sup-norm moments stay bounded uniformly in eps") {
    auto sys = make_system(8, ScalarLaw::linear_plus_source(-1.0, 1.0));
    const Schedule s{{1.0, 0.5}, {1.0, 0.5}, RhoBar::finite(1.0)};
    for (double eps : {1.0, 0.1, 0.01}) {
        double mean_sup = 0.0;
        for (std::uint64_t p = 0; p < 50; ++p) {
            const auto tr = solve_spde(sys, s.at(eps), sys.op->constant_field(0.5), 1.0, 0.01, RngStream(9, p));
            double sup = 0.0;
            for (const auto& u : tr.states) sup = std::max(sup, sys.op->h_mu_norm(u));
            mean_sup += sup / 50.0;
        }
        CHECK(mean_sup < 3.0);
    }
}

TEST_CASE("limit ODE: zero drift is constant, 2/pi is an equilibrium") {
    auto flat = make_system(8, ScalarLaw::constant(0.0));
    const auto zero = solve_limit_ode(model_of(flat, RhoBar::finite(1.0)), 0.3, 1.0, 0.1);
    for (double v : zero.values) CHECK(v == 0.3);
    auto src = make_system(16, ScalarLaw::linear_plus_source(-1.0, 1.0));
    const auto eq = solve_limit_ode(model_of(src, RhoBar::finite(1.0)), 2.0 / pi, 1.0, 0.1);
    for (double v : eq.values) CHECK(v == doctest::Approx(2.0 / pi).epsilon(1e-12));
}

TEST_CASE("averaged SDE: stationary variance gamma H / 2 within 3 MC sigma") {
    auto sys = make_system(4, ScalarLaw::linear(-1.0), 1.0, {{0.0, 0.0}});
    const auto m = model_of(sys, RhoBar::finite(0.0));  // H = 1
    const double gamma = 0.1;
    const std::size_t n = 10000;
    std::vector<double> end;
    for (std::uint64_t s = 0; s < n; ++s)
        end.push_back(solve_averaged_sde(m, gamma, 0.0, 4.0, 0.001, RngStream(21, s)).values.back());
    const double expect = gamma * 1.0 / 2.0;
    const double sigma = expect * std::sqrt(2.0 / static_cast<double>(n - 1));
    CHECK(std::abs(var_of(end) - expect) < 3.0 * sigma);
}

TEST_CASE("controlled ODE: interior control is inert when rho-bar is infinite") {
    auto sys = make_system(4, ScalarLaw::linear(-1.0));
    const auto m = model_of(sys, RhoBar::infinity());
    auto ctl = ControlPath::zero(time_grid(1.0, 0.1), 4);
    for (auto& ph : ctl.phi_H) ph.setConstant(5.0);
    const auto a = solve_controlled_ode(m, 1.0, ctl, 0.01);
    const auto b = solve_controlled_ode(m, 1.0, ControlPath::zero(ctl.times, 4), 0.01);
    CHECK(a.values.back() == b.values.back());
}

TEST_CASE("controlled SPDE with zero control equals the uncontrolled SPDE pathwise") {
    auto sys = make_system(8, ScalarLaw::linear_plus_source(-1.0, 1.0));
    const MultiscaleParams p{0.01, 0.1, 0.1, RhoBar::finite(1.0)};
    const auto x = sys.op->constant_field(0.5);
    const auto a = solve_spde(sys, p, x, 0.5, 0.001, RngStream(5, 5));
    const auto b = solve_controlled_spde(sys, p, x, 0.5, 0.001, RngStream(5, 5), ControlPath::zero(time_grid(0.5, 0.05), 8));
    CHECK((a.states.back().coeffs - b.states.back().coeffs).norm() == 0.0);
}

TEST_CASE("controlled SPDE, noise off, limit weights: tracks the controlled ODE at eps = 1e-3") {
    auto sys = make_system(16, ScalarLaw::linear_plus_source(-1.0, 1.0));
    const auto m = model_of(sys, RhoBar::finite(1.0));
    auto ctl = ControlPath::zero(time_grid(1.0, 0.1), 16);
    for (std::size_t i = 0; i < ctl.n_intervals(); ++i) {
        ctl.phi_H[i](0) = 1.0 - 0.2 * static_cast<double>(i);
        ctl.phi_H[i](3) = 0.5;
        ctl.phi_Z[i] = {{0.4, -0.8}};
    }
    Field x = sys.op->constant_field(0.5);
    x.coeffs(1) = 1.0 / std::sqrt(2.0);  // x = 0.5 + cos(pi xi)
    const ControlWeights limit{RhoBar::finite(1.0).interior_weight(), RhoBar::finite(1.0).boundary_weight()};
    SolveOptions o;
    o.noise = false;
    const auto spde = solve_controlled_spde(sys, {1e-3, 0.0, 0.0, RhoBar::finite(1.0)}, x, 1.0, 0.001,
                                            RngStream(0, 0), ctl, limit, o);
    const auto ode = solve_controlled_ode(m, 0.5, ctl, 0.001);
    CHECK(averaging_error(*sys.op, spde, ode, 0.1) < 0.02);
}

TEST_CASE("controlled SPDE: constant data, zero reaction, mode-0 control is a linear ramp") {
    auto sys = make_system(6, ScalarLaw::constant(0.0), 0.8);
    auto ctl = ControlPath::zero(time_grid(1.0, 0.25), 6);
    for (auto& ph : ctl.phi_H) ph(0) = 1.5;
    const MultiscaleParams p{0.1, 0.3, 0.1, RhoBar::finite(1.0 / 3.0)};
    SolveOptions o;
    o.noise = false;
    const auto tr = solve_controlled_spde(sys, p, sys.op->constant_field(0.2), 1.0, 0.01, RngStream(0, 0), ctl,
                                          std::nullopt, o);
    const double w = 0.3 / 0.4;  // alpha / (alpha + beta)
    for (std::size_t i = 0; i < tr.times.size(); ++i) {
        CHECK(tr.states[i].coeffs(0) == doctest::Approx(0.2 + w * 0.8 * 1.5 * tr.times[i]).epsilon(1e-12));
        CHECK(tr.states[i].coeffs.tail(5).norm() < 1e-14);
    }
}

TEST_CASE("averaging error excludes the initial layer") {
    auto sys = make_system(8, ScalarLaw::linear(-1.0));
    const auto m = model_of(sys, RhoBar::finite(1.0));
    Field x = sys.op->constant_field(1.0);
    x.coeffs(1) = 0.8;
    const auto tr = solve_spde(sys, {0.01, 0.0, 0.0, RhoBar::finite(1.0)}, x, 1.0, 0.01, RngStream(0, 0));
    const auto ode = solve_limit_ode(m, 1.0, 1.0, 0.01);
    CHECK(averaging_error(*sys.op, tr, ode, 0.0) > averaging_error(*sys.op, tr, ode, 0.5));
    CHECK(averaging_error(*sys.op, tr, ode, 0.0) >= 0.8);
}
