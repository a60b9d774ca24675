#pragma once

// Wiener increments for w^Q and w^B and the two stochastic convolutions of
// the mild solution, integrated exactly per mode (Ornstein-Uhlenbeck update).

#include "fastexit/covariance.hpp"
#include "fastexit/rng.hpp"
#include "fastexit/spectral.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace fastexit {

struct EigenvalueHypothesisReport {
    int dimension = 1;
    bool passed = false;
    std::string note;
    std::optional<double> rho;    // witness exponent for the interior sum
    std::optional<double> beta;   // witness exponent for the boundary sum
    double kappa_Q = 0.0;         // partial sum + tail estimate
    double kappa_B = 0.0;
};

/// Summability check on the covariance eigenvalues. For d = 1 white noise is
/// admissible and the check passes unconditionally. For d >= 2 a grid of
/// exponents below 2d/(d-2) (resp. 2d/(d-1)) is searched; a finite list is
/// declared summable when its tail decays faster than k^{-1.05}.
EigenvalueHypothesisReport check_hyp_eigenvalues(int dimension, const std::vector<double>& lambdas,
                                                 const std::vector<double>& sup_norms,
                                                 const std::vector<double>& thetas);

/// Mode k receives lambda_k * N(0, dt). Consumes sequential draws from rng.
Field sample_wQ_increment(const CovarianceSpectrumQ& spec, RngStream& rng, double dt);

/// Variance of int_0^dt e^{-alpha (dt-s)/eps} ds-noise: (eps/2 alpha)(1 - e^{-2 alpha dt/eps}); dt at alpha = 0.
double ou_step_variance(double alpha_k, double eps, double dt);

/// M_{kj} = <g e_j, e_k>, with g given at the quadrature nodes.
Eigen::MatrixXd interior_coupling(const SpectralOperator& op, const Eigen::VectorXd& g_on_grid);

/// b_{kp} = sigma(p) e_k(p). The (delta0 - A) factor and the Neumann-map
/// denominator (delta0 + alpha_k) cancel mode by mode, so no delta0 appears.
Eigen::Matrix<double, Eigen::Dynamic, 2> boundary_coupling(const SpectralOperator& op, const BoundaryData& sigma);

/// Per-step precomputation of decay factors and OU standard deviations.
struct OuFactors {
    Eigen::VectorXd decay;    // e^{-alpha_k dt / eps}
    Eigen::VectorXd std_dev;  // sqrt(v_k(dt))
    Eigen::VectorXd phi1_dt;  // dt * (e^z - 1)/z, z = -alpha_k dt / eps

    OuFactors(const SpectralOperator& op, double eps, double dt);
};

/// Draw slots used by the solvers.
inline constexpr std::uint32_t kInteriorSlot = 0;
inline constexpr std::uint32_t kBoundarySlot = 1u << 20;

/// Noise increment eta of the interior convolution over one step, keyed by `step`.
Eigen::VectorXd conv_Q_increment(const OuFactors& ou, const CovarianceSpectrumQ& spec,
                                 const Eigen::MatrixXd* coupling, const RngStream& rng, std::uint64_t step);
/// Noise increment of the boundary convolution over one step.
Eigen::VectorXd conv_B_increment(const OuFactors& ou, const CovarianceSpectrumB& spec,
                                 const Eigen::Matrix<double, Eigen::Dynamic, 2>& coupling, const RngStream& rng,
                                 std::uint64_t step);

/// One exponential step of w_{A,Q}: new_k = e^{-alpha_k dt/eps} state_k + eta_k,
/// with g frozen at the step start.
Field conv_Q_step(const SpectralOperator& op, const CovarianceSpectrumQ& spec, double eps, double dt,
                  const Eigen::VectorXd& g_on_grid, const Field& state, const RngStream& rng, std::uint64_t step);

/// One exponential step of w_{A,B}. `delta0` is validated but cancels.
Field conv_B_step(const SpectralOperator& op, const CovarianceSpectrumB& spec, const BoundaryData& sigma,
                  double delta0, double eps, double dt, const Field& state, const RngStream& rng,
                  std::uint64_t step);

}  // namespace fastexit
