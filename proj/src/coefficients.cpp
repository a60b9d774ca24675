#include "fastexit/coefficients.hpp"

#include <boost/math/quadrature/gauss.hpp>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <stdexcept>

namespace fastexit {

ScalarLaw ScalarLaw::constant(double c) {
    ScalarLaw l;
    l.kind = LawKind::constant;
    l.value = c;
    return l;
}

ScalarLaw ScalarLaw::linear(double slope, double offset, double slope_xi) {
    ScalarLaw l;
    l.kind = LawKind::linear;
    l.slope = slope;
    l.offset = offset;
    l.slope_xi = slope_xi;
    return l;
}

ScalarLaw ScalarLaw::linear_plus_source(double slope, double amplitude, double wavenumber, double offset) {
    ScalarLaw l;
    l.kind = LawKind::linear_plus_source;
    l.slope = slope;
    l.amplitude = amplitude;
    l.wavenumber = wavenumber;
    l.offset = offset;
    return l;
}

ScalarLaw ScalarLaw::logistic_clipped(double rate, double capacity) {
    if (!(capacity > 0.0)) throw std::invalid_argument("logistic_clipped: capacity must be positive");
    ScalarLaw l;
    l.kind = LawKind::logistic_clipped;
    l.rate = rate;
    l.capacity = capacity;
    return l;
}

double ScalarLaw::operator()(double /*t*/, double xi, double r) const {
    switch (kind) {
        case LawKind::constant:
            return value;
        case LawKind::linear:
            return (slope + slope_xi * xi) * r + offset;
        case LawKind::linear_plus_source:
            return slope * r + offset + amplitude * std::sin(wavenumber * std::numbers::pi * xi);
        case LawKind::logistic_clipped: {
            const double s = std::clamp(r, -capacity, 2.0 * capacity);
            return rate * s * (1.0 - s / capacity);
        }
    }
    return 0.0;
}

double ScalarLaw::d_dr(double /*t*/, double xi, double r) const {
    switch (kind) {
        case LawKind::constant:
            return 0.0;
        case LawKind::linear:
            return slope + slope_xi * xi;
        case LawKind::linear_plus_source:
            return slope;
        case LawKind::logistic_clipped:
            if (r < -capacity || r > 2.0 * capacity) return 0.0;
            return rate * (1.0 - 2.0 * r / capacity);
    }
    return 0.0;
}

double ScalarLaw::lipschitz_bound() const {
    switch (kind) {
        case LawKind::constant:
            return 0.0;
        case LawKind::linear:
            // xi ranges over [0, 1].
            return std::max(std::abs(slope), std::abs(slope + slope_xi));
        case LawKind::linear_plus_source:
            return std::abs(slope);
        case LawKind::logistic_clipped:
            return 3.0 * std::abs(rate);
    }
    return 0.0;
}

std::optional<double> ScalarLaw::sup_bound() const {
    switch (kind) {
        case LawKind::constant:
            return std::abs(value);
        case LawKind::linear:
            if (slope == 0.0 && slope_xi == 0.0) return std::abs(offset);
            return std::nullopt;
        case LawKind::linear_plus_source:
            if (slope == 0.0) return std::abs(offset) + std::abs(amplitude);
            return std::nullopt;
        case LawKind::logistic_clipped:
            // |s (1 - s/K)| peaks at s = -K or s = 2K with value 2K.
            return 2.0 * std::abs(rate) * capacity;
    }
    return std::nullopt;
}

std::string ScalarLaw::name() const {
    switch (kind) {
        case LawKind::constant:
            return "constant";
        case LawKind::linear:
            return "linear";
        case LawKind::linear_plus_source:
            return "linear_plus_source";
        case LawKind::logistic_clipped:
            return "logistic_clipped";
    }
    return "unknown";
}

RhoBar RhoBar::finite(double v) {
    if (!(v >= 0.0) || !std::isfinite(v)) throw std::invalid_argument("RhoBar: value must be finite and >= 0");
    return RhoBar(v, false);
}

Field nemytskii_F(const SpectralOperator& op, const CoefficientSet& cs, double t, const Field& u) {
    if (cs.f.is_constant()) {
        if (cs.f.value == 0.0) return Field::zero(op.n_modes());
        return op.constant_field(cs.f.value);
    }
    const Eigen::VectorXd grid = op.to_grid(u);
    const auto& xi = op.nodes();
    Eigen::VectorXd vals(grid.size());
    for (Eigen::Index i = 0; i < grid.size(); ++i) vals(i) = cs.f(t, xi(i), grid(i));
    return op.from_grid(vals);
}

Eigen::VectorXd nemytskii_G_multiplier(const SpectralOperator& op, const CoefficientSet& cs, double t,
                                       const Field& u) {
    const auto m = static_cast<Eigen::Index>(op.n_quadrature());
    if (cs.g.is_constant()) return Eigen::VectorXd::Constant(m, cs.g.value);
    const Eigen::VectorXd grid = op.to_grid(u);
    const auto& xi = op.nodes();
    Eigen::VectorXd vals(m);
    for (Eigen::Index i = 0; i < m; ++i) vals(i) = cs.g(t, xi(i), grid(i));
    return vals;
}

namespace {

Eigen::VectorXd lambda_vector(const SpectralOperator& op, const CovarianceSpectrumQ& q) {
    if (q.size() != op.n_modes())
        throw std::invalid_argument("Q spectrum length " + std::to_string(q.size()) +
                                    " does not match mode count " + std::to_string(op.n_modes()));
    return Eigen::Map<const Eigen::VectorXd>(q.lambdas.data(), static_cast<Eigen::Index>(q.size()));
}

}  // namespace

Eigen::VectorXd averaged_G_row(const CoefficientSet& cs, const SpectralOperator& op,
                               const CovarianceSpectrumQ& q, double t, double u) {
    const Eigen::VectorXd lam = lambda_vector(op, q);
    const auto& xi = op.nodes();
    Eigen::VectorXd gm(xi.size());
    for (Eigen::Index i = 0; i < xi.size(); ++i)
        gm(i) = cs.g(t, xi(i), u) * op.density_on_grid()(i) * op.weights()(i);
    return (lam.array() * (op.basis_on_grid().transpose() * gm).array()).matrix();
}

BoundaryData averaged_Sigma_row(const CoefficientSet& cs, const SpectralOperator& op,
                                const CovarianceSpectrumB& b, double delta0, double t) {
    if (!(delta0 > 0.0)) throw std::invalid_argument("averaged_Sigma_row: delta0 must be > 0");
    const BoundaryData nm = neumann_map_adjoint(op, delta0, Field(op.density_coeffs()));
    BoundaryData row;
    for (std::size_t p = 0; p < 2; ++p) row[p] = delta0 * b[p] * cs.sigma_at(t, p) * nm[p];
    return row;
}

AveragedModel::AveragedModel(std::shared_ptr<const SpectralOperator> op, CoefficientSet cs,
                             CovarianceSpectrumQ q, CovarianceSpectrumB b, RhoBar rho_bar, double delta0)
    : op_(std::move(op)), cs_(std::move(cs)), q_(std::move(q)), b_(b), rho_(rho_bar), delta0_(delta0) {
    if (!op_) throw std::invalid_argument("AveragedModel: null operator");
    if (!(delta0_ > 0.0)) throw std::invalid_argument("AveragedModel: delta0 must be > 0");
    sigma_row_ = averaged_Sigma_row(cs_, *op_, b_, delta0_, 0.0);
    weighted_density_ = (op_->weights().array() * op_->density_on_grid().array()).matrix();
    const Eigen::VectorXd lam = lambda_vector(*op_, q_);
    projector_ = lam.asDiagonal() * op_->basis_on_grid().transpose();
}

double AveragedModel::F_bar(double t, double u) const {
    if (cs_.f.is_constant()) return cs_.f.value;
    const double L = op_->domain_length();
    const double m = 1.0 / L;
    return boost::math::quadrature::gauss<double, 20>::integrate(
        [&](double xi) { return cs_.f(t, xi, u) * m; }, 0.0, L);
}

double AveragedModel::dF_bar(double t, double u) const {
    if (cs_.f.is_constant()) return 0.0;
    const double L = op_->domain_length();
    const double m = 1.0 / L;
    return boost::math::quadrature::gauss<double, 20>::integrate(
        [&](double xi) { return cs_.f.d_dr(t, xi, u) * m; }, 0.0, L);
}

Eigen::VectorXd AveragedModel::G_row(double t, double u) const {
    if (cs_.g.is_constant()) {
        const Eigen::VectorXd lam = lambda_vector(*op_, q_);
        return (cs_.g.value * lam.array() * op_->density_coeffs().array()).matrix();
    }
    const auto& xi = op_->nodes();
    Eigen::VectorXd gm(xi.size());
    for (Eigen::Index i = 0; i < xi.size(); ++i) gm(i) = cs_.g(t, xi(i), u) * weighted_density_(i);
    return projector_ * gm;
}

Eigen::VectorXd AveragedModel::dG_row(double t, double u) const {
    if (cs_.g.is_constant()) return Eigen::VectorXd::Zero(static_cast<Eigen::Index>(op_->n_modes()));
    const auto& xi = op_->nodes();
    Eigen::VectorXd gm(xi.size());
    for (Eigen::Index i = 0; i < xi.size(); ++i) gm(i) = cs_.g.d_dr(t, xi(i), u) * weighted_density_(i);
    return projector_ * gm;
}

BoundaryData AveragedModel::Sigma_row(double /*t*/) const { return sigma_row_; }

double AveragedModel::H(double t, double u) const {
    const double wi = rho_.interior_weight();
    const double wb = rho_.boundary_weight();
    double acc = wb * wb * sigma_row_.norm_sq();
    if (wi > 0.0) acc += wi * wi * G_row(t, u).squaredNorm();
    return acc;
}

double AveragedModel::dH(double t, double u) const {
    const double wi = rho_.interior_weight();
    if (wi == 0.0 || cs_.g.is_constant()) return 0.0;
    return 2.0 * wi * wi * G_row(t, u).dot(dG_row(t, u));
}

double averaged_F(const AveragedModel& model, double t, double u) { return model.F_bar(t, u); }

double noise_intensity_H(const AveragedModel& model, double t, double u) { return model.H(t, u); }

NondegeneracyReport check_nondegeneracy(const AveragedModel& model, const std::vector<double>& t_grid,
                                        const std::vector<double>& u_grid, double floor) {
    if (t_grid.empty() || u_grid.empty())
        throw std::invalid_argument("check_nondegeneracy: grids must be nonempty");
    NondegeneracyReport rep;
    rep.floor = floor;
    for (double t : t_grid) {
        for (double u : u_grid) {
            const double h = model.H(t, u);
            if (h < rep.min_h) {
                rep.min_h = h;
                rep.t_at_min = t;
                rep.u_at_min = u;
            }
        }
    }
    rep.passed = rep.min_h > floor;
    return rep;
}

LipschitzReport check_lipschitz(const CoefficientSet& cs, const SpectralOperator& op, double t_max,
                                std::size_t samples, std::uint64_t seed, double r_range) {
    std::mt19937_64 gen(seed);
    std::uniform_real_distribution<double> ut(0.0, t_max), ux(0.0, op.domain_length()),
        ur(-r_range, r_range);
    LipschitzReport rep;
    for (std::size_t s = 0; s < samples; ++s) {
        const double t = ut(gen), xi = ux(gen), r1 = ur(gen), r2 = ur(gen);
        if (r1 == r2) continue;
        const double dr = std::abs(r1 - r2);
        rep.max_ratio_f = std::max(rep.max_ratio_f, std::abs(cs.f(t, xi, r1) - cs.f(t, xi, r2)) / dr);
        rep.max_ratio_g = std::max(rep.max_ratio_g, std::abs(cs.g(t, xi, r1) - cs.g(t, xi, r2)) / dr);
    }
    for (Eigen::Index i = 0; i < op.nodes().size(); ++i) {
        const double xi = op.nodes()(i);
        rep.sup_f_at_zero = std::max(rep.sup_f_at_zero, std::abs(cs.f(0.0, xi, 0.0)));
        rep.sup_g_at_zero = std::max(rep.sup_g_at_zero, std::abs(cs.g(0.0, xi, 0.0)));
    }
    const double slack = 1.0 + 1e-9;
    rep.passed = rep.max_ratio_f <= cs.lipschitz_bound_f() * slack + 1e-12 &&
                 rep.max_ratio_g <= cs.lipschitz_bound_g() * slack + 1e-12 &&
                 std::isfinite(rep.sup_f_at_zero) && std::isfinite(rep.sup_g_at_zero);
    return rep;
}

}  // namespace fastexit
