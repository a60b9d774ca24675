#include "fastexit/coefficients.hpp"

#include <doctest.h>

#include <cmath>
#include <memory>
#include <numbers>
#include <stdexcept>

using namespace fastexit;
using std::numbers::pi;

namespace {

std::shared_ptr<const SpectralOperator> ref_op(std::size_t n = 16) {
    return std::make_shared<const SpectralOperator>(build_neumann_laplacian_1d(n));
}

AveragedModel make_model(const CoefficientSet& cs, double lambda, BoundaryData thetas, RhoBar rho,
                         double delta0 = 1.0, std::size_t n = 16) {
    return AveragedModel(ref_op(n), cs, CovarianceSpectrumQ::flat(n, lambda), CovarianceSpectrumB(thetas), rho,
                         delta0);
}

}  // namespace

TEST_CASE("catalog laws evaluate their closed forms") {
    CHECK(ScalarLaw::constant(2.5)(0.0, 0.3, -7.0) == 2.5);
    CHECK(ScalarLaw::linear(-1.0, 0.5)(0.0, 0.2, 2.0) == doctest::Approx(-1.5));
    CHECK(ScalarLaw::linear(0.0, 0.0, 1.0)(0.0, 0.25, 4.0) == doctest::Approx(1.0));
    CHECK(ScalarLaw::linear_plus_source(-1.0, 1.0)(0.0, 0.5, 0.0) == doctest::Approx(1.0));
    const auto logi = ScalarLaw::logistic_clipped(2.0, 1.0);
    CHECK(logi(0.0, 0.0, 0.5) == doctest::Approx(0.5));
    CHECK(logi(0.0, 0.0, 5.0) == doctest::Approx(logi(0.0, 0.0, 2.0)));
    CHECK(logi(0.0, 0.0, -5.0) == doctest::Approx(logi(0.0, 0.0, -1.0)));
}

TEST_CASE("law derivatives match central differences") {
    const ScalarLaw laws[] = {ScalarLaw::linear(-1.3, 0.2, 0.4), ScalarLaw::linear_plus_source(-1.0, 1.0, 2.0),
                              ScalarLaw::logistic_clipped(1.5, 2.0)};
    const double h = 1e-6;
    for (const auto& law : laws)
        for (double r : {-0.7, 0.1, 1.3}) {
            const double fd = (law(0.0, 0.3, r + h) - law(0.0, 0.3, r - h)) / (2 * h);
            CHECK(law.d_dr(0.0, 0.3, r) == doctest::Approx(fd).epsilon(1e-6));
        }
}

TEST_CASE("Nemytskii operator on the reference operator") {
    const auto op = ref_op(8);
    SUBCASE("identity law reproduces u") {
        CoefficientSet cs;
        cs.f = ScalarLaw::linear(1.0);
        Field u = Field::zero(8);
        u.coeffs << 0.5, 1.0, -0.3, 0, 0, 0.2, 0, 0;
        CHECK((nemytskii_F(*op, cs, 0.0, u).coeffs - u.coeffs).norm() < 1e-12);
    }
    SUBCASE("constant law maps to the constant mode") {
        CoefficientSet cs;
        cs.f = ScalarLaw::constant(3.0);
        const Field v = nemytskii_F(*op, cs, 0.0, Field::zero(8));
        CHECK(v.coeffs(0) == doctest::Approx(3.0));
        CHECK(v.coeffs.tail(7).norm() < 1e-12);
    }
    SUBCASE("G multiplier is g at the nodes") {
        CoefficientSet cs;
        cs.g = ScalarLaw::linear(2.0);
        Field u = Field::unit(8, 0);
        const auto g = nemytskii_G_multiplier(*op, cs, 0.0, u);
        CHECK(g.size() == static_cast<Eigen::Index>(op->n_quadrature()));
        CHECK((g.array() - 2.0).abs().maxCoeff() < 1e-12);
    }
}

TEST_CASE("averaged reaction F-bar") {
    CoefficientSet cs;
    SUBCASE("source term integrates to 2/pi") {
        cs.f = ScalarLaw::linear_plus_source(-1.0, 1.0);
        const auto m = make_model(cs, 1.0, {{1.0, 1.0}}, RhoBar::finite(1.0));
        CHECK(m.F_bar(0.0, 0.0) == doctest::Approx(2.0 / pi).epsilon(1e-12));
        CHECK(m.F_bar(0.0, 0.5) == doctest::Approx(2.0 / pi - 0.5).epsilon(1e-12));
        CHECK(m.dF_bar(0.0, 0.5) == doctest::Approx(-1.0));
    }
    SUBCASE("xi-dependent slope averages to u/2") {
        cs.f = ScalarLaw::linear(0.0, 0.0, 1.0);
        const auto m = make_model(cs, 1.0, {{1.0, 1.0}}, RhoBar::finite(1.0));
        for (double u : {-2.0, 0.0, 0.8}) CHECK(m.F_bar(0.0, u) == doctest::Approx(u / 2).epsilon(1e-12));
        CHECK(averaged_F(m, 0.0, 0.8) == doctest::Approx(0.4));
    }
    SUBCASE("linear law with r-independence of xi-source averages exactly") {
        cs.f = ScalarLaw::linear(-2.0, 1.0);
        const auto m = make_model(cs, 1.0, {{1.0, 1.0}}, RhoBar::finite(1.0));
        CHECK(m.F_bar(0.0, 1.5) == doctest::Approx(-2.0));
    }
}

TEST_CASE("averaged gain rows") {
    CoefficientSet cs;
    const auto op = ref_op(8);
    SUBCASE("constant g projects onto the constant mode") {
        cs.g = ScalarLaw::constant(2.0);
        const auto row = averaged_G_row(cs, *op, CovarianceSpectrumQ::flat(8, 0.5), 0.0, 0.3);
        CHECK(row(0) == doctest::Approx(1.0));
        CHECK(row.tail(7).norm() < 1e-12);
    }
    SUBCASE("boundary row is theta times sigma, independent of delta0") {
        cs.sigma = {{2.0, -1.0}};
        const CovarianceSpectrumB b(BoundaryData{{0.5, 3.0}});
        for (double delta0 : {1.0, 10.0}) {
            const auto row = averaged_Sigma_row(cs, *op, b, delta0, 0.0);
            CHECK(row[0] == doctest::Approx(1.0).epsilon(1e-12));
            CHECK(row[1] == doctest::Approx(-3.0).epsilon(1e-12));
        }
    }
}

TEST_CASE("noise intensity H across regimes") {
    CoefficientSet cs;
    SUBCASE("rho-bar = 0 keeps only the interior part") {
        const auto m = make_model(cs, 1.0, {{1.0, 1.0}}, RhoBar::finite(0.0));
        CHECK(m.H(0.0, 0.0) == doctest::Approx(1.0));
    }
    SUBCASE("rho-bar = infinity keeps only the boundary part") {
        const auto m = make_model(cs, 1.0, {{1.0, 1.0}}, RhoBar::infinity());
        CHECK(m.H(0.0, 0.0) == doctest::Approx(2.0));
    }
    SUBCASE("rho-bar = 1 mixes with quarter weights") {
        const auto m = make_model(cs, 1.0, {{1.0, 1.0}}, RhoBar::finite(1.0));
        CHECK(m.H(0.0, 0.0) == doctest::Approx(0.75));
        CHECK(noise_intensity_H(m, 0.0, 5.0) == doctest::Approx(0.75));
        CHECK(m.dH(0.0, 5.0) == doctest::Approx(0.0));
        CHECK(m.is_additive());
    }
    SUBCASE("multiplicative gain: H = a^2 lambda^2 (c u)^2 + boundary") {
        cs.g = ScalarLaw::linear(2.0);
        const auto m = make_model(cs, 1.0, {{0.0, 0.0}}, RhoBar::finite(0.0));
        CHECK(!m.is_additive());
        CHECK(m.H(0.0, 0.5) == doctest::Approx(1.0));
        CHECK(m.dH(0.0, 0.5) == doctest::Approx(4.0));
    }
    SUBCASE("delta0 has no effect on H") {
        const auto a = make_model(cs, 1.0, {{0.3, 0.7}}, RhoBar::finite(2.0), 1.0);
        const auto b = make_model(cs, 1.0, {{0.3, 0.7}}, RhoBar::finite(2.0), 25.0);
        CHECK(a.H(0.0, 0.0) == doctest::Approx(b.H(0.0, 0.0)).epsilon(1e-12));
    }
}

TEST_CASE("rho-bar weights") {
    CHECK(RhoBar::finite(1.0).interior_weight() == 0.5);
    CHECK(RhoBar::finite(3.0).boundary_weight() == 0.75);
    CHECK(RhoBar::infinity().interior_weight() == 0.0);
    CHECK(RhoBar::infinity().boundary_weight() == 1.0);
    CHECK_THROWS_AS(RhoBar::finite(-1.0), std::invalid_argument);
}

TEST_CASE("nondegeneracy check") {
    CoefficientSet cs;
    SUBCASE("additive noise passes with the constant value") {
        const auto m = make_model(cs, 1.0, {{1.0, 1.0}}, RhoBar::finite(1.0));
        const auto rep = check_nondegeneracy(m, {0.0, 1.0}, {-1.0, 0.0, 1.0});
        CHECK(rep.passed);
        CHECK(rep.min_h == doctest::Approx(0.75));
    }
    SUBCASE("multiplicative gain vanishing at u = 0 fails there") {
        cs.g = ScalarLaw::linear(1.0);
        const auto m = make_model(cs, 1.0, {{0.0, 0.0}}, RhoBar::finite(0.0));
        const auto rep = check_nondegeneracy(m, {0.0}, {-1.0, 0.0, 1.0});
        CHECK(!rep.passed);
        CHECK(rep.min_h == doctest::Approx(0.0).scale(1.0));
        CHECK(rep.u_at_min == 0.0);
    }
    SUBCASE("boundary noise rescues the vanishing interior gain") {
        cs.g = ScalarLaw::linear(1.0);
        const auto m = make_model(cs, 1.0, {{1.0, 0.0}}, RhoBar::finite(1.0));
        const auto rep = check_nondegeneracy(m, {0.0}, {-1.0, 0.0, 1.0});
        CHECK(rep.passed);
        CHECK(rep.min_h == doctest::Approx(0.25));
    }
}

TEST_CASE("Lipschitz evidence") {
    const auto op = ref_op(8);
    CoefficientSet cs;
    cs.f = ScalarLaw::logistic_clipped(1.0, 2.0);
    cs.g = ScalarLaw::linear(0.5, 1.0);
    const auto rep = check_lipschitz(cs, *op, 1.0, 2000, 7);
    CHECK(rep.passed);
    CHECK(rep.max_ratio_f <= cs.lipschitz_bound_f() * (1 + 1e-9));
    CHECK(rep.max_ratio_g <= cs.lipschitz_bound_g() * (1 + 1e-9));
    CHECK(rep.max_ratio_g == doctest::Approx(0.5).epsilon(1e-6));
    CHECK(rep.sup_g_at_zero == doctest::Approx(1.0));
}

TEST_CASE("Nemytskii examples: odd linear law, source mean, zero law") {
    const auto op = ref_op(8);
    CoefficientSet cs;
    cs.f = ScalarLaw::linear(-1.0);
    const Field v = nemytskii_F(*op, cs, 0.0, Field::unit(8, 1));
    CHECK((v.coeffs + Field::unit(8, 1).coeffs).norm() < 1e-12);
    cs.f = ScalarLaw::linear_plus_source(-1.0, 1.0);
    CHECK(invariant_average(*op, nemytskii_F(*op, cs, 0.0, Field::zero(8))) ==
          doctest::Approx(2.0 / pi).epsilon(1e-3));  // 32-point midpoint rule, error ~ pi h^2 / 12
    cs.f = ScalarLaw::constant(0.0);
    CHECK(nemytskii_F(*op, cs, 0.0, Field::unit(8, 2)).h_norm() == 0.0);
}

TEST_CASE("F-bar of the plain linear law is -u") {
    CoefficientSet cs;
    cs.f = ScalarLaw::linear(-1.0);
    const auto m = make_model(cs, 1.0, {{1.0, 1.0}}, RhoBar::finite(1.0));
    for (double u : {-1.0, 0.25, 3.0}) CHECK(m.F_bar(0.0, u) == doctest::Approx(-u));
}

TEST_CASE("gain rows: zero g, affine g, zero sigma, unit boundary row") {
    const auto op = ref_op(8);
    CoefficientSet cs;
    const auto q = CovarianceSpectrumQ::flat(8, 0.7);
    cs.g = ScalarLaw::constant(0.0);
    CHECK(averaged_G_row(cs, *op, q, 0.0, 1.0).norm() == 0.0);
    cs.g = ScalarLaw::linear(1.0, 1.0);
    const auto row = averaged_G_row(cs, *op, q, 0.0, 1.0);
    CHECK(row(0) == doctest::Approx(1.4));
    CHECK(row.tail(7).norm() < 1e-12);
    cs.sigma = {{0.0, 0.0}};
    const auto z = averaged_Sigma_row(cs, *op, CovarianceSpectrumB(BoundaryData{{1.0, 1.0}}), 1.0, 0.0);
    CHECK(z[0] == 0.0);
    CHECK(z[1] == 0.0);
    cs.sigma = {{1.0, 1.0}};
    const auto u = averaged_Sigma_row(cs, *op, CovarianceSpectrumB(BoundaryData{{1.0, 1.0}}), 1.0, 0.0);
    CHECK(u[0] == doctest::Approx(1.0));
    CHECK(u[1] == doctest::Approx(1.0));
}

TEST_CASE("rho-bar = infinity passes nondegeneracy whatever g is") {
    CoefficientSet cs;
    cs.g = ScalarLaw::linear(1.0);
    const auto m = make_model(cs, 1.0, {{1.0, 1.0}}, RhoBar::infinity());
    const auto rep = check_nondegeneracy(m, {0.0}, {-1.0, 0.0, 1.0});
    CHECK(rep.passed);
    CHECK(rep.min_h == doctest::Approx(2.0));
}
