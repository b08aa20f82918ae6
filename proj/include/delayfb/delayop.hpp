#pragma once

// Backward-difference differentiation operators: from n output samples
// spaced h apart, reconstruct the n-dimensional state estimate
// (y, y', ..., y^(n-1)) at the newest sample time. Exact on polynomials
// of degree <= n-1, with explicit boundedness and error constants.

#include <cstddef>
#include <vector>

#include "delayfb/linalg.hpp"

namespace delayfb::delayop {

// Dimensions are capped repo-wide: the Vandermonde system behind the
// weights becomes too ill-conditioned past n = 8.
inline constexpr std::size_t kMaxOrder = 8;

/// The matrix realization of the estimator for fixed (n, h). Row i of
/// coeff carries the weights of the (i-1)-th derivative estimate; row 0
/// is (1, 0, ..., 0) so the first component is y(0) itself.
struct DelayOperator {
    std::size_t n;
    double h;
    linalg::Matrix coeff;  // diag(1, 1!/(-h), ..., (n-1)!/(-h)^(n-1)) * P^{-1}
};

/// Boundedness and error constants of the operator family. K0 is the
/// tightened row-sum bound (the default used downstream); K0_generic is
/// the norm-based proof value. K[j-1] bounds the input-j error channel.
struct EstimatorConstants {
    std::size_t n;
    double K0;          // sqrt(n) * max_i (i-1)! * rowabssum_i(P^{-1})
    double K0_generic;  // sqrt(n) * |P^{-1}| * (n-1)!
    std::vector<double> K;  // K_1 ... K_n
};

/// Builds the operator for dimension n in [2, 8] and step h in (0, 1].
DelayOperator build_delay_operator(std::size_t n, double h);

/// Applies the operator to samples ordered newest-first:
/// (y(0), y(-h), ..., y(-(n-1)h)). Component i estimates y^(i)(0).
linalg::Vec apply(const DelayOperator& op, std::span<const double> samples);

/// Constants for dimension n: tightened K0, the generic proof K0, and the
/// generic K_1..K_n built from |P^{-1}| and max_{0<=s<=n-1} |exp(As)|.
/// The sup over s is located on a 1000-point grid (checked nondecreasing)
/// and refined to 1e-6.
EstimatorConstants estimator_constants(std::size_t n);

/// The n = 3 constant set used by the worked three-integrator example:
/// K0 = 4*sqrt(3) and K3 = sqrt(136), with K1, K2 from the generic
/// formulas. Sharper than estimator_constants(3) and verified empirically
/// by the error-bound property suite.
EstimatorConstants example31_constants();

} // namespace delayfb::delayop
