#pragma once

// Reaction and noise-gain coefficients, their Nemytskii operators, and the
// averaged (mu-integrated) coefficients of the one-dimensional limit dynamics.

#include "fastexit/covariance.hpp"
#include "fastexit/spectral.hpp"

#include <cstdint>
#include <limits>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace fastexit {

enum class LawKind { constant, linear, linear_plus_source, logistic_clipped };

/// Closed-form scalar law r -> f(t, xi, r) from the registered catalog.
///
///   constant            value
///   linear              (slope + slope_xi * xi) * r + offset
///   linear_plus_source  slope * r + offset + amplitude * sin(wavenumber * pi * xi)
///   logistic_clipped    rate * s * (1 - s / capacity),  s = clamp(r, -capacity, 2 capacity)
///
/// All catalog laws are autonomous.
struct ScalarLaw {
    LawKind kind = LawKind::constant;
    double value = 0.0;
    double slope = 0.0;
    double slope_xi = 0.0;
    double offset = 0.0;
    double amplitude = 0.0;
    double wavenumber = 1.0;
    double rate = 0.0;
    double capacity = 1.0;

    static ScalarLaw constant(double c);
    static ScalarLaw linear(double slope, double offset = 0.0, double slope_xi = 0.0);
    static ScalarLaw linear_plus_source(double slope, double amplitude, double wavenumber = 1.0,
                                        double offset = 0.0);
    static ScalarLaw logistic_clipped(double rate, double capacity);

    double operator()(double t, double xi, double r) const;
    double d_dr(double t, double xi, double r) const;

    /// Declared Lipschitz constant in r (exact for the catalog).
    double lipschitz_bound() const;
    /// sup over (xi, r) of |law|, if finite.
    std::optional<double> sup_bound() const;
    bool is_constant() const { return kind == LawKind::constant; }
    std::string name() const;
};

/// Extended nonnegative real for the scaling limit beta/alpha.
class RhoBar {
public:
    static RhoBar finite(double v);
    static RhoBar infinity() { return RhoBar(0.0, true); }

    bool is_infinite() const { return infinite_; }
    double value() const { return infinite_ ? std::numeric_limits<double>::infinity() : value_; }
    /// 1/(1+rho); 0 at infinity.
    double interior_weight() const { return infinite_ ? 0.0 : 1.0 / (1.0 + value_); }
    /// rho/(1+rho); 1 at infinity.
    double boundary_weight() const { return infinite_ ? 1.0 : value_ / (1.0 + value_); }

private:
    RhoBar(double v, bool inf) : value_(v), infinite_(inf) {}
    double value_;
    bool infinite_;
};

struct CoefficientSet {
    ScalarLaw f = ScalarLaw::constant(0.0);
    ScalarLaw g = ScalarLaw::constant(1.0);
    BoundaryData sigma{{1.0, 1.0}};
    /// Required by exit experiments.
    std::optional<double> g_sup_bound;

    double lipschitz_bound_f() const { return f.lipschitz_bound(); }
    double lipschitz_bound_g() const { return g.lipschitz_bound(); }
    double sigma_at(double /*t*/, std::size_t p) const { return sigma[p]; }
};

/// F(t,u)(xi) = f(t, xi, u(xi)), evaluated on the quadrature grid and projected.
Field nemytskii_F(const SpectralOperator& op, const CoefficientSet& cs, double t, const Field& u);
/// g(t, xi_i, u(xi_i)) at the quadrature nodes (the multiplier of G(t,u)).
Eigen::VectorXd nemytskii_G_multiplier(const SpectralOperator& op, const CoefficientSet& cs, double t,
                                       const Field& u);

/// Mode j: lambda_j <g(t,.,u) m, e_j>; the vector sqrt(Q)[G(t,u) m].
Eigen::VectorXd averaged_G_row(const CoefficientSet& cs, const SpectralOperator& op,
                               const CovarianceSpectrumQ& q, double t, double u);
/// The vector delta0 sqrt(B)[Sigma(t) N_{delta0}^* m].
BoundaryData averaged_Sigma_row(const CoefficientSet& cs, const SpectralOperator& op,
                                const CovarianceSpectrumB& b, double delta0, double t);

class AveragedModel {
public:
    AveragedModel(std::shared_ptr<const SpectralOperator> op, CoefficientSet cs, CovarianceSpectrumQ q,
                  CovarianceSpectrumB b, RhoBar rho_bar, double delta0 = 1.0);

    const SpectralOperator& op() const { return *op_; }
    std::shared_ptr<const SpectralOperator> op_ptr() const { return op_; }
    const CoefficientSet& coefficients() const { return cs_; }
    const CovarianceSpectrumQ& q() const { return q_; }
    const CovarianceSpectrumB& b() const { return b_; }
    RhoBar rho_bar() const { return rho_; }
    double delta0() const { return delta0_; }

    double F_bar(double t, double u) const;
    double dF_bar(double t, double u) const;
    Eigen::VectorXd G_row(double t, double u) const;
    Eigen::VectorXd dG_row(double t, double u) const;
    BoundaryData Sigma_row(double t) const;
    double H(double t, double u) const;
    double dH(double t, double u) const;

    /// u-independent interior gain, so H is constant.
    bool is_additive() const { return cs_.g.is_constant(); }
    bool is_autonomous() const { return true; }

private:
    std::shared_ptr<const SpectralOperator> op_;
    CoefficientSet cs_;
    CovarianceSpectrumQ q_;
    CovarianceSpectrumB b_;
    RhoBar rho_;
    double delta0_;
    BoundaryData sigma_row_;
    Eigen::VectorXd weighted_density_;  // w_i m_i
    Eigen::MatrixXd projector_;         // diag(lambda) E^T diag(w m)
};

/// F-bar(t, u) = integral of f(t, xi, u) against mu.
double averaged_F(const AveragedModel& model, double t, double u);
double noise_intensity_H(const AveragedModel& model, double t, double u);

struct NondegeneracyReport {
    double min_h = std::numeric_limits<double>::infinity();
    double t_at_min = 0.0;
    double u_at_min = 0.0;
    double floor = 0.0;
    bool passed = false;
};

NondegeneracyReport check_nondegeneracy(const AveragedModel& model, const std::vector<double>& t_grid,
                                        const std::vector<double>& u_grid, double floor = 1e-12);

struct LipschitzReport {
    double max_ratio_f = 0.0;
    double max_ratio_g = 0.0;
    double sup_f_at_zero = 0.0;
    double sup_g_at_zero = 0.0;
    bool passed = false;
};

/// Sampled evidence (not proof) that f, g respect their declared Lipschitz
/// constants and are bounded at r = 0.
LipschitzReport check_lipschitz(const CoefficientSet& cs, const SpectralOperator& op, double t_max,
                                std::size_t samples, std::uint64_t seed, double r_range = 10.0);

}  // namespace fastexit
