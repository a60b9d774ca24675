#pragma once

#include "fastexit/spectral.hpp"

#include <cstddef>
#include <vector>

namespace fastexit {

/// Eigenvalues lambda_k of sqrt(Q) in the basis {e_k}; one per interior mode.
struct CovarianceSpectrumQ {
    std::vector<double> lambdas;

    CovarianceSpectrumQ() = default;
    explicit CovarianceSpectrumQ(std::vector<double> values);

    static CovarianceSpectrumQ flat(std::size_t n, double value);
    /// lambda_k = amplitude * (k + 1)^(-exponent).
    static CovarianceSpectrumQ power_law(std::size_t n, double amplitude, double exponent);

    std::size_t size() const { return lambdas.size(); }
    double operator[](std::size_t k) const { return lambdas[k]; }
};

/// Eigenvalues theta_j of sqrt(B), one per boundary point of (0,1).
struct CovarianceSpectrumB {
    BoundaryData thetas;

    CovarianceSpectrumB() = default;
    explicit CovarianceSpectrumB(BoundaryData values);
    double operator[](std::size_t p) const { return thetas[p]; }
};

}  // namespace fastexit
