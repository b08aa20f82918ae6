#pragma once

// Small dense linear algebra: Vandermonde construction and inversion,
// nilpotent matrix exponential, induced 2-norm. Everything here is sized
// for the n <= 8 regime the rest of the library works in; no attempt is
// made at large or sparse problems.

#include <cstddef>
#include <initializer_list>
#include <span>
#include <vector>

#include "delayfb/errors.hpp"

namespace delayfb::linalg {

using Vec = std::vector<double>;

/// Dense row-major matrix of doubles. Value type: cheap to copy at the
/// sizes used here, immutable by convention once built.
class Matrix {
public:
    Matrix(std::size_t rows, std::size_t cols);
    Matrix(std::size_t rows, std::size_t cols, std::initializer_list<double> entries);
    Matrix(std::size_t rows, std::size_t cols, Vec entries);

    static Matrix identity(std::size_t n);
    static Matrix diagonal(std::span<const double> d);

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }
    bool square() const { return rows_ == cols_; }

    double& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
    double operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }

    const Vec& data() const { return data_; }

    Matrix transposed() const;
    Matrix operator*(const Matrix& rhs) const;
    Matrix operator+(const Matrix& rhs) const;
    Matrix operator-(const Matrix& rhs) const;
    Matrix operator*(double s) const;

    /// Matrix-vector product.
    Vec apply(std::span<const double> x) const;

    bool is_finite() const;
    double max_abs() const;
    double norm_inf() const;           // max absolute row sum
    double row_abs_sum(std::size_t i) const;

private:
    std::size_t rows_;
    std::size_t cols_;
    Vec data_;
};

/// n x n matrix with entry (i,j) = i^j for zero-based i,j and 0^0 = 1.
/// Row i holds the powers of the node i; this is the sample-to-polynomial
/// system whose inverse yields backward-difference weights.
Matrix vandermonde(std::size_t n);

/// Inverse by Gauss-Jordan elimination with partial pivoting, followed by
/// Newton refinement sweeps (X <- X + X(I - AX)) while the residual
/// improves. Throws SingularMatrixError when a pivot falls below
/// tolerance relative to the largest entry.
Matrix invert(const Matrix& m);

/// exp(A s) for the n x n upper-shift matrix A (ones on the superdiagonal):
/// entry (i,j) = s^(j-i)/(j-i)! for j >= i, else 0. A is nilpotent, so the
/// series terminates and the result is an exact finite polynomial.
Matrix nilpotent_exp(std::size_t n, double s);

/// Largest singular value, via power iteration on m'm to relative
/// tolerance 1e-10. Deterministic all-ones start vector with a perturbed
/// restart if the iteration stalls; throws NumericalFailure past the
/// iteration cap.
double induced_norm2(const Matrix& m);

/// Largest (signed) eigenvalue of a symmetric matrix, computed as
/// |S + rho I| - rho with rho = |S| so that the shifted matrix is PSD and
/// its induced 2-norm equals its top eigenvalue.
double sym_eig_max(const Matrix& s);

/// Smallest eigenvalue of a symmetric matrix (= -sym_eig_max(-S)).
double sym_eig_min(const Matrix& s);

/// True iff the symmetric matrix admits a Cholesky factorization with
/// strictly positive pivots.
bool cholesky_spd(const Matrix& s);

double dot(std::span<const double> a, std::span<const double> b);
double norm2(std::span<const double> x);

} // namespace delayfb::linalg
