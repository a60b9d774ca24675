#include "fastexit/noise.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace fastexit {

CovarianceSpectrumQ::CovarianceSpectrumQ(std::vector<double> values) : lambdas(std::move(values)) {
    for (double v : lambdas)
        if (!(v >= 0.0) || !std::isfinite(v))
            throw std::invalid_argument("CovarianceSpectrumQ: eigenvalues must be finite and >= 0");
}

CovarianceSpectrumQ CovarianceSpectrumQ::flat(std::size_t n, double value) {
    return CovarianceSpectrumQ(std::vector<double>(n, value));
}

CovarianceSpectrumQ CovarianceSpectrumQ::power_law(std::size_t n, double amplitude, double exponent) {
    std::vector<double> v(n);
    for (std::size_t k = 0; k < n; ++k) v[k] = amplitude * std::pow(static_cast<double>(k + 1), -exponent);
    return CovarianceSpectrumQ(std::move(v));
}

CovarianceSpectrumB::CovarianceSpectrumB(BoundaryData values) : thetas(values) {
    for (double v : thetas.values)
        if (!(v >= 0.0) || !std::isfinite(v))
            throw std::invalid_argument("CovarianceSpectrumB: eigenvalues must be finite and >= 0");
}

namespace {

struct SumEstimate {
    bool converges = false;
    double value = std::numeric_limits<double>::infinity();
};

// Decides summability of a finite list of nonnegative terms from the decay
// of its tail, fitted as a power law on the last half.
SumEstimate estimate_series(const std::vector<double>& terms) {
    SumEstimate est;
    double partial = 0.0;
    for (double a : terms) partial += a;
    if (terms.size() < 8) {
        est.converges = std::isfinite(partial);
        est.value = partial;
        return est;
    }
    const std::size_t start = terms.size() / 2;
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    std::size_t count = 0;
    for (std::size_t k = start; k < terms.size(); ++k) {
        if (!(terms[k] > 0.0)) continue;
        const double x = std::log(static_cast<double>(k + 1));
        const double y = std::log(terms[k]);
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
        ++count;
    }
    if (count == 0) {
        est.converges = true;
        est.value = partial;
        return est;
    }
    if (count < 2) return est;
    const double n = static_cast<double>(count);
    const double slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    const double p = -slope;
    if (!(p > 1.05)) return est;
    const double last = terms.back();
    est.converges = true;
    est.value = partial + last * static_cast<double>(terms.size()) / (p - 1.0);
    return est;
}

std::vector<double> exponent_grid(double threshold) {
    if (!std::isfinite(threshold)) return {0.5, 1.0, 2.0, 4.0, 8.0};
    std::vector<double> grid;
    for (double f : {0.1, 0.25, 0.5, 0.75, 0.9, 0.99}) grid.push_back(f * threshold);
    return grid;
}

}  // namespace

EigenvalueHypothesisReport check_hyp_eigenvalues(int dimension, const std::vector<double>& lambdas,
                                                 const std::vector<double>& sup_norms,
                                                 const std::vector<double>& thetas) {
    if (dimension < 1) throw std::invalid_argument("check_hyp_eigenvalues: dimension must be >= 1");
    EigenvalueHypothesisReport rep;
    rep.dimension = dimension;
    if (dimension == 1) {
        rep.passed = true;
        rep.note = "d = 1: space-time white noise is admissible; no summability condition imposed";
        return rep;
    }
    if (sup_norms.size() != lambdas.size())
        throw std::invalid_argument("check_hyp_eigenvalues: sup_norms and lambdas differ in length");

    const double d = static_cast<double>(dimension);
    const double rho_max = dimension == 2 ? std::numeric_limits<double>::infinity() : 2.0 * d / (d - 2.0);
    const double beta_max = 2.0 * d / (d - 1.0);

    for (double rho : exponent_grid(rho_max)) {
        std::vector<double> terms(lambdas.size());
        for (std::size_t k = 0; k < lambdas.size(); ++k)
            terms[k] = std::pow(lambdas[k], rho) * sup_norms[k] * sup_norms[k];
        const auto est = estimate_series(terms);
        if (est.converges) {
            rep.rho = rho;
            rep.kappa_Q = est.value;
            break;
        }
    }
    for (double beta : exponent_grid(beta_max)) {
        std::vector<double> terms(thetas.size());
        for (std::size_t k = 0; k < thetas.size(); ++k) terms[k] = std::pow(thetas[k], beta);
        const auto est = estimate_series(terms);
        if (est.converges) {
            rep.beta = beta;
            rep.kappa_B = est.value;
            break;
        }
    }
    rep.passed = rep.rho.has_value() && rep.beta.has_value();
    if (!rep.rho) rep.note = "interior sum diverges for every exponent on the grid";
    else if (!rep.beta) rep.note = "boundary sum diverges for every exponent on the grid";
    else rep.note = "summable partial sums found";
    return rep;
}

Field sample_wQ_increment(const CovarianceSpectrumQ& spec, RngStream& rng, double dt) {
    if (!(dt > 0.0)) throw std::invalid_argument("sample_wQ_increment: dt must be > 0");
    const double s = std::sqrt(dt);
    Field out = Field::zero(spec.size());
    for (std::size_t k = 0; k < spec.size(); ++k)
        out.coeffs(static_cast<Eigen::Index>(k)) = spec[k] * s * rng.next_normal();
    return out;
}

double ou_step_variance(double alpha_k, double eps, double dt) {
    if (alpha_k <= 0.0) return dt;
    const double z = 2.0 * alpha_k * dt / eps;
    return -(eps / (2.0 * alpha_k)) * std::expm1(-z);
}

Eigen::MatrixXd interior_coupling(const SpectralOperator& op, const Eigen::VectorXd& g_on_grid) {
    const auto& E = op.basis_on_grid();
    const Eigen::VectorXd wg = (op.weights().array() * g_on_grid.array()).matrix();
    return E.transpose() * wg.asDiagonal() * E;
}

Eigen::Matrix<double, Eigen::Dynamic, 2> boundary_coupling(const SpectralOperator& op, const BoundaryData& sigma) {
    Eigen::Matrix<double, Eigen::Dynamic, 2> b(static_cast<Eigen::Index>(op.n_modes()), 2);
    b.col(0) = sigma[0] * op.boundary_basis().row(0).transpose();
    b.col(1) = sigma[1] * op.boundary_basis().row(1).transpose();
    return b;
}

OuFactors::OuFactors(const SpectralOperator& op, double eps, double dt) {
    if (!(eps > 0.0) || !(dt > 0.0)) throw std::invalid_argument("OuFactors: eps and dt must be > 0");
    const auto n = static_cast<Eigen::Index>(op.n_modes());
    decay.resize(n);
    std_dev.resize(n);
    phi1_dt.resize(n);
    for (Eigen::Index k = 0; k < n; ++k) {
        const double a = op.eigenvalues()(k);
        const double z = -a * dt / eps;
        decay(k) = std::exp(z);
        std_dev(k) = std::sqrt(ou_step_variance(a, eps, dt));
        phi1_dt(k) = z == 0.0 ? dt : dt * std::expm1(z) / z;
    }
}

Eigen::VectorXd conv_Q_increment(const OuFactors& ou, const CovarianceSpectrumQ& spec,
                                 const Eigen::MatrixXd* coupling, const RngStream& rng, std::uint64_t step) {
    const auto n = ou.decay.size();
    Eigen::VectorXd z(n);
    for (Eigen::Index j = 0; j < n; ++j)
        z(j) = spec[static_cast<std::size_t>(j)] * rng.normal(step, kInteriorSlot + static_cast<std::uint32_t>(j));
    // The same Brownian increments drive every mode; marginal variances are exact.
    Eigen::VectorXd eta = coupling ? Eigen::VectorXd((*coupling) * z) : z;
    return (eta.array() * ou.std_dev.array()).matrix();
}

Eigen::VectorXd conv_B_increment(const OuFactors& ou, const CovarianceSpectrumB& spec,
                                 const Eigen::Matrix<double, Eigen::Dynamic, 2>& coupling, const RngStream& rng,
                                 std::uint64_t step) {
    const Eigen::Vector2d z(spec[0] * rng.normal(step, kBoundarySlot), spec[1] * rng.normal(step, kBoundarySlot + 1));
    return ((coupling * z).array() * ou.std_dev.array()).matrix();
}

Field conv_Q_step(const SpectralOperator& op, const CovarianceSpectrumQ& spec, double eps, double dt,
                  const Eigen::VectorXd& g_on_grid, const Field& state, const RngStream& rng, std::uint64_t step) {
    if (!(eps > 0.0) || !(dt > 0.0)) throw std::invalid_argument("conv_Q_step: eps and dt must be > 0");
    if (spec.size() != op.n_modes()) throw std::invalid_argument("conv_Q_step: spectrum length mismatch");
    const OuFactors ou(op, eps, dt);
    const Eigen::MatrixXd m = interior_coupling(op, g_on_grid);
    Field out = state;
    out.coeffs.array() *= ou.decay.array();
    out.coeffs += conv_Q_increment(ou, spec, &m, rng, step);
    return out;
}

Field conv_B_step(const SpectralOperator& op, const CovarianceSpectrumB& spec, const BoundaryData& sigma,
                  double delta0, double eps, double dt, const Field& state, const RngStream& rng,
                  std::uint64_t step) {
    if (!(eps > 0.0) || !(dt > 0.0)) throw std::invalid_argument("conv_B_step: eps and dt must be > 0");
    if (!(delta0 > 0.0)) throw std::invalid_argument("conv_B_step: delta0 must be > 0");
    const OuFactors ou(op, eps, dt);
    Field out = state;
    out.coeffs.array() *= ou.decay.array();
    out.coeffs += conv_B_increment(ou, spec, boundary_coupling(op, sigma), rng, step);
    return out;
}

}  // namespace fastexit
