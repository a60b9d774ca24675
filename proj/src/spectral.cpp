#include "fastexit/spectral.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

namespace fastexit {

SpectralOperator::SpectralOperator(Eigen::VectorXd eigenvalues, Eigen::MatrixXd basis_on_grid,
                                   Eigen::Matrix<double, 2, Eigen::Dynamic> boundary_basis,
                                   EigenfunctionEval eigenfunction, double domain_length)
    : eigenvalues_(std::move(eigenvalues)),
      basis_(std::move(basis_on_grid)),
      boundary_basis_(std::move(boundary_basis)),
      eigenfunction_(std::move(eigenfunction)),
      domain_length_(domain_length) {
    const auto n = eigenvalues_.size();
    const auto m = basis_.rows();
    if (n < 2) throw std::invalid_argument("SpectralOperator: need at least 2 modes");
    if (basis_.cols() != n || boundary_basis_.cols() != n)
        throw std::invalid_argument("SpectralOperator: basis shape does not match eigenvalue count");
    if (m < n) throw std::invalid_argument("SpectralOperator: fewer quadrature nodes than modes");
    if (!(domain_length_ > 0.0)) throw std::invalid_argument("SpectralOperator: domain length must be positive");

    spectral_gap_ = 0.0;
    for (Eigen::Index k = 0; k < n; ++k) {
        if (eigenvalues_(k) > 0.0) {
            spectral_gap_ = eigenvalues_(k);
            break;
        }
    }
    if (!(spectral_gap_ > 0.0)) throw std::invalid_argument("SpectralOperator: no positive eigenvalue");

    const double h = domain_length_ / static_cast<double>(m);
    nodes_.resize(m);
    for (Eigen::Index i = 0; i < m; ++i) nodes_(i) = (static_cast<double>(i) + 0.5) * h;
    weights_ = Eigen::VectorXd::Constant(m, h);

    // Divergence-type operators leave the normalized Lebesgue measure invariant.
    const double mval = 1.0 / domain_length_;
    density_ = Eigen::VectorXd::Constant(m, mval);
    measure_.density_at = [mval](double) { return mval; };
    measure_.total_mass = (weights_.array() * density_.array()).sum();

    mean_row_ = Eigen::VectorXd::Zero(n);
    mean_row_(0) = 1.0 / std::sqrt(domain_length_);
    density_coeffs_ = Eigen::VectorXd::Zero(n);
    density_coeffs_(0) = 1.0 / std::sqrt(domain_length_);
}

BoundaryData SpectralOperator::boundary_values(std::size_t k) const {
    const auto c = static_cast<Eigen::Index>(k);
    return BoundaryData{{boundary_basis_(0, c), boundary_basis_(1, c)}};
}

Field SpectralOperator::from_grid(const Eigen::VectorXd& values) const {
    return Field(basis_.transpose() * (weights_.array() * values.array()).matrix());
}

Field SpectralOperator::constant_field(double value) const {
    Field f = Field::zero(n_modes());
    f.coeffs(0) = value * std::sqrt(domain_length_);
    return f;
}

double SpectralOperator::constant_value(const Field& h) const {
    return h.coeffs(0) / std::sqrt(domain_length_);
}

double SpectralOperator::h_mu_norm(const Field& h) const {
    return h.coeffs.norm() / std::sqrt(domain_length_);
}

double SpectralOperator::nonconstant_magnitude(const Field& h) const {
    if (h.coeffs.size() < 2) return 0.0;
    return h.coeffs.tail(h.coeffs.size() - 1).cwiseAbs().maxCoeff();
}

SpectralOperator build_neumann_laplacian_1d(std::size_t n_modes, std::size_t quadrature_points) {
    if (n_modes < 2)
        throw std::invalid_argument("build_neumann_laplacian_1d: n_modes must be >= 2, got " +
                                    std::to_string(n_modes));
    const std::size_t m = quadrature_points == 0 ? 4 * n_modes : quadrature_points;
    if (m < 4 * n_modes)
        throw std::invalid_argument("build_neumann_laplacian_1d: need at least 4 quadrature points per mode");

    const auto n = static_cast<Eigen::Index>(n_modes);
    const auto mi = static_cast<Eigen::Index>(m);
    constexpr double pi = std::numbers::pi;

    Eigen::VectorXd eig(n);
    for (Eigen::Index k = 0; k < n; ++k) eig(k) = std::pow(static_cast<double>(k) * pi, 2);

    auto ef = [](std::size_t k, double xi) {
        if (k == 0) return 1.0;
        return std::numbers::sqrt2 * std::cos(static_cast<double>(k) * std::numbers::pi * xi);
    };

    Eigen::MatrixXd basis(mi, n);
    const double h = 1.0 / static_cast<double>(m);
    for (Eigen::Index i = 0; i < mi; ++i) {
        const double xi = (static_cast<double>(i) + 0.5) * h;
        for (Eigen::Index k = 0; k < n; ++k) basis(i, k) = ef(static_cast<std::size_t>(k), xi);
    }
    Eigen::Matrix<double, 2, Eigen::Dynamic> bnd(2, n);
    for (Eigen::Index k = 0; k < n; ++k) {
        bnd(0, k) = k == 0 ? 1.0 : std::numbers::sqrt2;
        bnd(1, k) = k == 0 ? 1.0 : ((k % 2 == 0) ? std::numbers::sqrt2 : -std::numbers::sqrt2);
    }
    return SpectralOperator(std::move(eig), std::move(basis), std::move(bnd), ef, 1.0);
}

SpectralOperator build_divergence_operator_1d(std::size_t n_modes,
                                              const std::function<double(double)>& diffusivity,
                                              std::size_t n_cells) {
    if (n_modes < 2) throw std::invalid_argument("build_divergence_operator_1d: n_modes must be >= 2");
    const std::size_t m = n_cells == 0 ? std::max<std::size_t>(16 * n_modes, 256) : n_cells;
    if (m < 4 * n_modes) throw std::invalid_argument("build_divergence_operator_1d: too few cells");

    const auto mi = static_cast<Eigen::Index>(m);
    const auto n = static_cast<Eigen::Index>(n_modes);
    const double h = 1.0 / static_cast<double>(m);

    // Symmetric finite-volume stiffness for -A with zero boundary flux.
    Eigen::MatrixXd K = Eigen::MatrixXd::Zero(mi, mi);
    for (Eigen::Index i = 0; i + 1 < mi; ++i) {
        const double a = diffusivity(static_cast<double>(i + 1) * h);
        if (!(a > 0.0)) throw std::invalid_argument("build_divergence_operator_1d: diffusivity must be positive");
        const double c = a / (h * h);
        K(i, i) += c;
        K(i + 1, i + 1) += c;
        K(i, i + 1) -= c;
        K(i + 1, i) -= c;
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(K);
    if (solver.info() != Eigen::Success)
        throw std::runtime_error("build_divergence_operator_1d: eigen-decomposition failed");

    Eigen::VectorXd eig = solver.eigenvalues().head(n);
    Eigen::MatrixXd basis = solver.eigenvectors().leftCols(n) * std::sqrt(static_cast<double>(m));
    // The constant vector is an exact null vector of K.
    eig(0) = 0.0;
    basis.col(0).setOnes();

    Eigen::Matrix<double, 2, Eigen::Dynamic> bnd(2, n);
    for (Eigen::Index k = 0; k < n; ++k) {
        // Quadratic extrapolation with zero boundary slope.
        double left = (9.0 * basis(0, k) - basis(1, k)) / 8.0;
        if (left < 0.0) {
            basis.col(k) *= -1.0;
            left = -left;
        }
        bnd(0, k) = left;
        bnd(1, k) = (9.0 * basis(mi - 1, k) - basis(mi - 2, k)) / 8.0;
    }

    Eigen::MatrixXd grid_vals = basis;
    Eigen::Matrix<double, 2, Eigen::Dynamic> bnd_copy = bnd;
    auto ef = [grid_vals, bnd_copy, h, mi](std::size_t k, double xi) {
        const auto c = static_cast<Eigen::Index>(k);
        const double s = xi / h - 0.5;
        if (s <= 0.0) {
            const double w = std::clamp(xi / (0.5 * h), 0.0, 1.0);
            return (1.0 - w) * bnd_copy(0, c) + w * grid_vals(0, c);
        }
        if (s >= static_cast<double>(mi - 1)) {
            const double w = std::clamp((1.0 - xi) / (0.5 * h), 0.0, 1.0);
            return (1.0 - w) * bnd_copy(1, c) + w * grid_vals(mi - 1, c);
        }
        const auto i = static_cast<Eigen::Index>(std::floor(s));
        const double w = s - static_cast<double>(i);
        return (1.0 - w) * grid_vals(i, c) + w * grid_vals(i + 1, c);
    };
    return SpectralOperator(std::move(eig), std::move(basis), std::move(bnd), ef, 1.0);
}

Field semigroup_apply(const SpectralOperator& op, double t, const Field& h) {
    if (t < 0.0) throw std::invalid_argument("semigroup_apply: t must be >= 0");
    Field out = h;
    out.coeffs.array() *= (-op.eigenvalues().array() * t).exp();
    return out;
}

double invariant_average(const SpectralOperator& op, const Field& h) {
    return op.mean_row().dot(h.coeffs);
}

SpectralGapReport check_spectral_gap(const SpectralOperator& op, const Field& h,
                                     const std::vector<double>& times, double tolerance) {
    if (times.empty()) throw std::invalid_argument("check_spectral_gap: times must be nonempty");
    SpectralGapReport report;
    const double avg = invariant_average(op, h);
    const double hnorm = op.h_mu_norm(h);
    for (double t : times) {
        if (t < 0.0) throw std::invalid_argument("check_spectral_gap: negative time");
        Field evolved = semigroup_apply(op, t, h);
        evolved.coeffs -= op.constant_field(avg).coeffs;
        SpectralGapEntry e{t, op.h_mu_norm(evolved), std::exp(-op.spectral_gap() * t) * hnorm, 0.0};
        e.margin = e.rhs - e.lhs;
        if (e.margin < -tolerance * std::max(1.0, e.rhs)) report.passed = false;
        report.entries.push_back(e);
    }
    return report;
}

Field neumann_map(const SpectralOperator& op, double delta, const BoundaryData& h) {
    if (!(delta > 0.0)) throw std::invalid_argument("neumann_map: delta must be > 0");
    const auto& b = op.boundary_basis();
    Eigen::VectorXd c = (h[0] * b.row(0) + h[1] * b.row(1)).transpose();
    c.array() /= (delta + op.eigenvalues().array());
    return Field(std::move(c));
}

BoundaryData neumann_map_adjoint(const SpectralOperator& op, double delta, const Field& v) {
    if (!(delta > 0.0)) throw std::invalid_argument("neumann_map_adjoint: delta must be > 0");
    Eigen::VectorXd scaled = v.coeffs.array() / (delta + op.eigenvalues().array());
    const auto& b = op.boundary_basis();
    return BoundaryData{{b.row(0).dot(scaled), b.row(1).dot(scaled)}};
}

}  // namespace fastexit
