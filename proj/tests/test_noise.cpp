#include "fastexit/noise.hpp"

#include <doctest.h>

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <vector>

using namespace fastexit;
using std::numbers::pi;

namespace {

struct Moments {
    double mean = 0.0;
    double var = 0.0;
};

Moments moments(const std::vector<double>& x) {
    Moments m;
    for (double v : x) m.mean += v;
    m.mean /= static_cast<double>(x.size());
    for (double v : x) m.var += (v - m.mean) * (v - m.mean);
    m.var /= static_cast<double>(x.size() - 1);
    return m;
}

}  // namespace

TEST_CASE("Philox4x32-10 known-answer vectors") {
    const auto z = philox4x32_10({0, 0, 0, 0}, {0, 0});
    CHECK(z[0] == 0x6627e8d5u);
    CHECK(z[1] == 0xe169c58du);
    CHECK(z[2] == 0xbc57ac4cu);
    CHECK(z[3] == 0x9b00dbd8u);
    const auto f = philox4x32_10({0xffffffffu, 0xffffffffu, 0xffffffffu, 0xffffffffu}, {0xffffffffu, 0xffffffffu});
    CHECK(f[0] == 0x408f276du);
    CHECK(f[1] == 0x41c83b0eu);
    CHECK(f[2] == 0xa20bc7c6u);
    CHECK(f[3] == 0x6d5451fdu);
}

TEST_CASE("keyed normals are reproducible and standard") {
    const RngStream a(42, 7), b(42, 7), c(42, 8);
    CHECK(a.normal(3, 1) == b.normal(3, 1));
    CHECK(a.normal(3, 1) != c.normal(3, 1));
    CHECK(a.normal(3, 1) != a.normal(3, 2));
    std::vector<double> xs;
    for (std::uint64_t i = 0; i < 200000; ++i) xs.push_back(a.normal(i, 0));
    const auto m = moments(xs);
    CHECK(std::abs(m.mean) < 0.01);
    CHECK(m.var == doctest::Approx(1.0).epsilon(0.01));
    for (std::uint64_t i = 0; i < 1000; ++i) {
        const double u = a.uniform(i, 5);
        CHECK((u > 0.0 && u < 1.0));
    }
}

TEST_CASE("sequential draws follow the keyed sequence") {
    RngStream r(9, 1);
    const RngStream ref(9, 1);
    for (std::uint64_t i = 0; i < 5; ++i) CHECK(r.next_normal() == ref.normal(i, RngStream::kSequentialSlot));
    CHECK(r.position() == 5);
}

TEST_CASE("Q-Wiener increment: variance lambda_k^2 dt, reproducible") {
    const auto spec = CovarianceSpectrumQ::power_law(4, 1.0, 1.0);
    const double dt = 0.01;
    const int n = 20000;
    std::vector<std::vector<double>> samples(4);
    for (int s = 0; s < n; ++s) {
        RngStream rng(1, static_cast<std::uint64_t>(s));
        const Field w = sample_wQ_increment(spec, rng, dt);
        for (int k = 0; k < 4; ++k) samples[k].push_back(w.coeffs(k));
    }
    for (int k = 0; k < 4; ++k) {
        const double expect = spec[k] * spec[k] * dt;
        CHECK(moments(samples[k]).var == doctest::Approx(expect).epsilon(0.04));
    }
    RngStream r1(3, 3), r2(3, 3);
    CHECK((sample_wQ_increment(spec, r1, dt).coeffs - sample_wQ_increment(spec, r2, dt).coeffs).norm() == 0.0);
    CHECK_THROWS_AS(sample_wQ_increment(spec, r1, 0.0), std::invalid_argument);
}

TEST_CASE("OU step variance closed form") {
    CHECK(ou_step_variance(0.0, 0.1, 0.02) == 0.02);
    const double a = pi * pi, eps = 0.1, dt = 0.02;
    CHECK(ou_step_variance(a, eps, dt) == doctest::Approx(eps / (2 * a) * (1 - std::exp(-2 * a * dt / eps))));
    // small-dt limit is dt
    CHECK(ou_step_variance(a, eps, 1e-9) == doctest::Approx(1e-9).epsilon(1e-6));
}

TEST_CASE("OU factors") {
    const auto op = build_neumann_laplacian_1d(4);
    const OuFactors ou(op, 0.5, 0.01);
    CHECK(ou.decay(0) == 1.0);
    CHECK(ou.phi1_dt(0) == 0.01);
    CHECK(ou.decay(1) == doctest::Approx(std::exp(-pi * pi * 0.02)));
    CHECK(ou.phi1_dt(1) == doctest::Approx((1 - std::exp(-pi * pi * 0.02)) * 0.5 / (pi * pi)));
    CHECK(ou.std_dev(2) == doctest::Approx(std::sqrt(ou_step_variance(4 * pi * pi, 0.5, 0.01))));
}

TEST_CASE("couplings") {
    const auto op = build_neumann_laplacian_1d(6);
    const Eigen::VectorXd ones = Eigen::VectorXd::Ones(static_cast<Eigen::Index>(op.n_quadrature()));
    CHECK((interior_coupling(op, ones) - Eigen::MatrixXd::Identity(6, 6)).cwiseAbs().maxCoeff() < 1e-12);
    const auto b = boundary_coupling(op, {{2.0, 3.0}});
    CHECK(b(0, 0) == doctest::Approx(2.0));
    CHECK(b(0, 1) == doctest::Approx(3.0));
    CHECK(b(1, 0) == doctest::Approx(2.0 * std::sqrt(2.0)));
    CHECK(b(1, 1) == doctest::Approx(-3.0 * std::sqrt(2.0)));
}

TEST_CASE("interior convolution: one-step and stationary variances") {
    const auto op = build_neumann_laplacian_1d(4);
    const auto spec = CovarianceSpectrumQ::flat(4, 1.0);
    const Eigen::VectorXd g = Eigen::VectorXd::Ones(static_cast<Eigen::Index>(op.n_quadrature()));
    const double eps = 0.1, dt = 0.005;
    const int n = 4000, steps = 200;  // t = 1 = 10 eps / alpha_1 relaxation times
    std::vector<double> first1, last1, last2;
    for (int s = 0; s < n; ++s) {
        const RngStream rng(5, static_cast<std::uint64_t>(s));
        Field st = Field::zero(4);
        for (int i = 0; i < steps; ++i) {
            st = conv_Q_step(op, spec, eps, dt, g, st, rng, static_cast<std::uint64_t>(i));
            if (i == 0) first1.push_back(st.coeffs(1));
        }
        last1.push_back(st.coeffs(1));
        last2.push_back(st.coeffs(2));
    }
    CHECK(moments(first1).var == doctest::Approx(ou_step_variance(pi * pi, eps, dt)).epsilon(0.07));
    CHECK(moments(last1).var == doctest::Approx(eps / (2 * pi * pi)).epsilon(0.07));
    CHECK(moments(last2).var == doctest::Approx(eps / (8 * pi * pi)).epsilon(0.07));
}

TEST_CASE("boundary convolution: constant mode variance 2 dt, delta0 cancels") {
    const auto op = build_neumann_laplacian_1d(4);
    const CovarianceSpectrumB spec(BoundaryData{{1.0, 1.0}});
    const double dt = 0.01;
    std::vector<double> m0;
    for (int s = 0; s < 20000; ++s) {
        const RngStream rng(8, static_cast<std::uint64_t>(s));
        const Field a = conv_B_step(op, spec, {{1.0, 1.0}}, 1.0, 0.1, dt, Field::zero(4), rng, 0);
        const Field b = conv_B_step(op, spec, {{1.0, 1.0}}, 10.0, 0.1, dt, Field::zero(4), rng, 0);
        CHECK((a.coeffs - b.coeffs).norm() == 0.0);
        m0.push_back(a.coeffs(0));
    }
    CHECK(moments(m0).var == doctest::Approx(2 * dt).epsilon(0.04));
    CHECK_THROWS_AS(conv_B_step(op, spec, {{1.0, 1.0}}, 0.0, 0.1, dt, Field::zero(4), RngStream(0, 0), 0),
                    std::invalid_argument);
}

TEST_CASE("eigenvalue summability hypothesis") {
    SUBCASE("d = 1 is unconditional") {
        const auto rep = check_hyp_eigenvalues(1, {1.0, 1.0, 1.0}, {1.0, 1.0, 1.0}, {1.0, 1.0});
        CHECK(rep.passed);
    }
    SUBCASE("d = 2 flat spectrum with bounded eigenfunctions fails") {
        std::vector<double> lam(64, 1.0), sup(64, std::sqrt(2.0));
        const auto rep = check_hyp_eigenvalues(2, lam, sup, {1.0, 1.0});
        CHECK(!rep.passed);
        CHECK(!rep.rho.has_value());
    }
    SUBCASE("d = 2 algebraic decay passes with a finite exponent") {
        std::vector<double> lam, sup(64, std::sqrt(2.0));
        for (int k = 1; k <= 64; ++k) lam.push_back(1.0 / k);
        const auto rep = check_hyp_eigenvalues(2, lam, sup, {1.0, 1.0});
        CHECK(rep.passed);
        REQUIRE(rep.rho.has_value());
        CHECK(*rep.rho > 1.0);
    }
    SUBCASE("d = 3: k^-1/4 decay needs an exponent above 4, below the threshold 6") {
        std::vector<double> lam, sup(200, 1.0);
        for (int k = 1; k <= 200; ++k) lam.push_back(std::pow(k, -0.25));
        const auto rep = check_hyp_eigenvalues(3, lam, sup, {1.0, 1.0});
        CHECK(rep.passed);
        REQUIRE(rep.rho.has_value());
        CHECK(*rep.rho > 4.0);
        CHECK(*rep.rho < 6.0);
    }
    SUBCASE("d = 3: k^-1/8 decay has no admissible exponent") {
        std::vector<double> lam, sup(200, 1.0);
        for (int k = 1; k <= 200; ++k) lam.push_back(std::pow(k, -0.125));
        CHECK(!check_hyp_eigenvalues(3, lam, sup, {1.0, 1.0}).passed);
    }
    SUBCASE("invalid input") {
        CHECK_THROWS_AS(check_hyp_eigenvalues(0, {}, {}, {}), std::invalid_argument);
        CHECK_THROWS_AS(check_hyp_eigenvalues(2, {1.0}, {}, {}), std::invalid_argument);
    }
}

TEST_CASE("d = 2 with lambda_k = k^-2 and sup norms sqrt 2 is summable at rho = 1") {
    std::vector<double> lam, sup(64, std::sqrt(2.0));
    for (int k = 1; k <= 64; ++k) lam.push_back(1.0 / (k * k));
    const auto rep = check_hyp_eigenvalues(2, lam, sup, {1.0, 1.0});
    CHECK(rep.passed);
    REQUIRE(rep.rho.has_value());
    CHECK(*rep.rho <= 1.0);
    CHECK(std::isfinite(rep.kappa_Q));
    CHECK(rep.kappa_Q > 0.0);
}

TEST_CASE("zero spectra give zero noise and pure decay") {
    const auto op = build_neumann_laplacian_1d(4);
    RngStream rng(1, 1);
    CHECK(sample_wQ_increment(CovarianceSpectrumQ::flat(4, 0.0), rng, 0.1).h_norm() == 0.0);
    Field x = Field::zero(4);
    x.coeffs << 1.0, 1.0, -1.0, 0.5;
    const Eigen::VectorXd g = Eigen::VectorXd::Ones(static_cast<Eigen::Index>(op.n_quadrature()));
    const Field q = conv_Q_step(op, CovarianceSpectrumQ::flat(4, 0.0), 0.1, 0.01, g, x, rng, 0);
    const Field b = conv_B_step(op, CovarianceSpectrumB(BoundaryData{{1.0, 1.0}}), {{0.0, 0.0}}, 1.0, 0.1, 0.01, x,
                                rng, 0);
    for (int k = 0; k < 4; ++k) {
        const double decay = std::exp(-op.eigenvalue(k) * 0.01 / 0.1);
        CHECK(q.coeffs(k) == doctest::Approx(decay * x.coeffs(k)).epsilon(1e-14));
        CHECK(b.coeffs(k) == doctest::Approx(decay * x.coeffs(k)).epsilon(1e-14));
    }
}

TEST_CASE("interior constant mode accumulates lambda_0^2 dt per step") {
    const auto op = build_neumann_laplacian_1d(4);
    const auto spec = CovarianceSpectrumQ::flat(4, 0.5);
    const Eigen::VectorXd g = Eigen::VectorXd::Ones(static_cast<Eigen::Index>(op.n_quadrature()));
    const double dt = 0.01;
    std::vector<double> after1, after10;
    for (int s = 0; s < 20000; ++s) {
        const RngStream rng(12, static_cast<std::uint64_t>(s));
        Field st = Field::zero(4);
        for (int i = 0; i < 10; ++i) {
            st = conv_Q_step(op, spec, 0.1, dt, g, st, rng, static_cast<std::uint64_t>(i));
            if (i == 0) after1.push_back(st.coeffs(0));
        }
        after10.push_back(st.coeffs(0));
    }
    CHECK(moments(after1).var == doctest::Approx(0.25 * dt).epsilon(0.04));
    CHECK(moments(after10).var == doctest::Approx(0.25 * 10 * dt).epsilon(0.04));
}
