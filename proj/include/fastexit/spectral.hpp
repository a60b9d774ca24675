#pragma once

// Spectral representation of the elliptic operator A with conormal (Neumann)
// boundary condition on the unit interval. Everything downstream works with
// coefficients in the eigenbasis {e_k}; a midpoint quadrature grid is used
// for pointwise (Nemytskii) evaluations.

#include <Eigen/Dense>

#include <array>
#include <cstddef>
#include <functional>
#include <vector>

namespace fastexit {

/// Element of Z = L^2 of the boundary {0, 1} with counting measure.
struct BoundaryData {
    std::array<double, 2> values{0.0, 0.0};

    double operator[](std::size_t p) const { return values[p]; }
    double& operator[](std::size_t p) { return values[p]; }
    double norm_sq() const { return values[0] * values[0] + values[1] * values[1]; }
    double dot(const BoundaryData& o) const {
        return values[0] * o.values[0] + values[1] * o.values[1];
    }
};

/// A function on the domain, stored as eigenmode coefficients.
struct Field {
    Eigen::VectorXd coeffs;

    Field() = default;
    explicit Field(Eigen::VectorXd c) : coeffs(std::move(c)) {}

    static Field zero(std::size_t n) { return Field(Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n))); }
    static Field unit(std::size_t n, std::size_t k) {
        Field f = zero(n);
        f.coeffs(static_cast<Eigen::Index>(k)) = 1.0;
        return f;
    }

    std::size_t size() const { return static_cast<std::size_t>(coeffs.size()); }
    /// Norm in H = L^2(O); Parseval.
    double h_norm() const { return coeffs.norm(); }
};

struct InvariantMeasure {
    std::function<double(double)> density_at;
    double total_mass = 1.0;
};

class SpectralOperator {
public:
    using EigenfunctionEval = std::function<double(std::size_t, double)>;

    /// Low-level constructor used by the builders. `basis_on_grid` is M x N
    /// (values of e_k at the quadrature nodes), `boundary_basis` is 2 x N.
    SpectralOperator(Eigen::VectorXd eigenvalues, Eigen::MatrixXd basis_on_grid,
                     Eigen::Matrix<double, 2, Eigen::Dynamic> boundary_basis,
                     EigenfunctionEval eigenfunction, double domain_length);

    std::size_t n_modes() const { return static_cast<std::size_t>(eigenvalues_.size()); }
    std::size_t n_quadrature() const { return static_cast<std::size_t>(nodes_.size()); }
    double domain_length() const { return domain_length_; }

    const Eigen::VectorXd& eigenvalues() const { return eigenvalues_; }
    double eigenvalue(std::size_t k) const { return eigenvalues_(static_cast<Eigen::Index>(k)); }
    /// Smallest strictly positive eigenvalue.
    double spectral_gap() const { return spectral_gap_; }

    double eigenfunction_at(std::size_t k, double xi) const { return eigenfunction_(k, xi); }
    /// (e_k(0), e_k(1)).
    BoundaryData boundary_values(std::size_t k) const;
    const Eigen::Matrix<double, 2, Eigen::Dynamic>& boundary_basis() const { return boundary_basis_; }

    const Eigen::VectorXd& nodes() const { return nodes_; }
    const Eigen::VectorXd& weights() const { return weights_; }
    const Eigen::MatrixXd& basis_on_grid() const { return basis_; }
    const InvariantMeasure& invariant_measure() const { return measure_; }
    /// Density m of the invariant measure at the quadrature nodes.
    const Eigen::VectorXd& density_on_grid() const { return density_; }
    /// <e_k, mu> for every k.
    const Eigen::VectorXd& mean_row() const { return mean_row_; }
    /// <m, e_k>_H for every k.
    const Eigen::VectorXd& density_coeffs() const { return density_coeffs_; }

    Eigen::VectorXd to_grid(const Field& h) const { return basis_ * h.coeffs; }
    Field from_grid(const Eigen::VectorXd& values) const;
    /// Projection of the constant function `value`.
    Field constant_field(double value) const;
    /// Value of the constant function represented by mode 0 of `h`.
    double constant_value(const Field& h) const;
    /// |h|_{H_mu}; Parseval scaled by the uniform density.
    double h_mu_norm(const Field& h) const;
    /// Largest |coefficient| over the non-constant modes.
    double nonconstant_magnitude(const Field& h) const;

private:
    Eigen::VectorXd eigenvalues_;
    Eigen::MatrixXd basis_;
    Eigen::Matrix<double, 2, Eigen::Dynamic> boundary_basis_;
    EigenfunctionEval eigenfunction_;
    double domain_length_;
    double spectral_gap_ = 0.0;
    Eigen::VectorXd nodes_;
    Eigen::VectorXd weights_;
    Eigen::VectorXd density_;
    Eigen::VectorXd mean_row_;
    Eigen::VectorXd density_coeffs_;
    InvariantMeasure measure_;
};

/// A = d^2/dxi^2 on (0,1) with Neumann conditions: alpha_k = (k pi)^2,
/// e_0 = 1, e_k = sqrt(2) cos(k pi xi). `quadrature_points` = 0 picks 4 N.
SpectralOperator build_neumann_laplacian_1d(std::size_t n_modes, std::size_t quadrature_points = 0);

/// A = d/dxi (a(xi) d/dxi) on (0,1) with conormal conditions, eigen-decomposed
/// from a cell-centred finite-volume discretization with `n_cells` cells.
SpectralOperator build_divergence_operator_1d(std::size_t n_modes,
                                              const std::function<double(double)>& diffusivity,
                                              std::size_t n_cells = 0);

/// e^{tA} h. Throws std::invalid_argument for t < 0.
Field semigroup_apply(const SpectralOperator& op, double t, const Field& h);

/// <h, mu> = integral of h against the invariant measure.
double invariant_average(const SpectralOperator& op, const Field& h);

struct SpectralGapEntry {
    double t;
    double lhs;     // |e^{tA}h - <h,mu>|_{H_mu}
    double rhs;     // e^{-gamma t} |h|_{H_mu}
    double margin;  // rhs - lhs
};

struct SpectralGapReport {
    std::vector<SpectralGapEntry> entries;
    bool passed = true;
};

/// Checks the exponential-mixing bound with constant c = 1 (self-adjoint case).
SpectralGapReport check_spectral_gap(const SpectralOperator& op, const Field& h,
                                     const std::vector<double>& times, double tolerance = 1e-12);

/// Neumann map N_delta: boundary flux data -> interior solution of
/// (delta - A) u = 0. Mode k: (h(0) e_k(0) + h(1) e_k(1)) / (delta + alpha_k).
Field neumann_map(const SpectralOperator& op, double delta, const BoundaryData& h);

/// Adjoint N_delta^*: H -> Z, (N^* v)(p) = sum_k <v,e_k> e_k(p) / (delta + alpha_k).
BoundaryData neumann_map_adjoint(const SpectralOperator& op, double delta, const Field& v);

}  // namespace fastexit
