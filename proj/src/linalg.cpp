#include "delayfb/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <utility>

namespace delayfb::linalg {

namespace {

double ipow(std::size_t base, std::size_t exp) {
    double r = 1.0;
    for (std::size_t k = 0; k < exp; ++k) r *= static_cast<double>(base);
    return r;
}

} // namespace

Matrix::Matrix(std::size_t rows, std::size_t cols)
    : rows_(rows), cols_(cols), data_(rows * cols, 0.0) {
    if (rows < 1 || cols < 1) throw DimensionError("Matrix: rows and cols must be >= 1");
}

Matrix::Matrix(std::size_t rows, std::size_t cols, std::initializer_list<double> entries)
    : Matrix(rows, cols, Vec(entries)) {}

Matrix::Matrix(std::size_t rows, std::size_t cols, Vec entries)
    : rows_(rows), cols_(cols), data_(std::move(entries)) {
    if (rows < 1 || cols < 1) throw DimensionError("Matrix: rows and cols must be >= 1");
    if (data_.size() != rows * cols)
        throw DimensionError("Matrix: entry count does not match rows*cols");
    for (double v : data_)
        if (!std::isfinite(v)) throw DomainError("Matrix: entries must be finite");
}

Matrix Matrix::identity(std::size_t n) {
    Matrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
}

Matrix Matrix::diagonal(std::span<const double> d) {
    Matrix m(d.size(), d.size());
    for (std::size_t i = 0; i < d.size(); ++i) m(i, i) = d[i];
    return m;
}

Matrix Matrix::transposed() const {
    Matrix t(cols_, rows_);
    for (std::size_t i = 0; i < rows_; ++i)
        for (std::size_t j = 0; j < cols_; ++j) t(j, i) = (*this)(i, j);
    return t;
}

Matrix Matrix::operator*(const Matrix& rhs) const {
    if (cols_ != rhs.rows_) throw DimensionError("Matrix multiply: inner dimensions differ");
    Matrix r(rows_, rhs.cols_);
    for (std::size_t i = 0; i < rows_; ++i)
        for (std::size_t k = 0; k < cols_; ++k) {
            const double a = (*this)(i, k);
            if (a == 0.0) continue;
            for (std::size_t j = 0; j < rhs.cols_; ++j) r(i, j) += a * rhs(k, j);
        }
    return r;
}

Matrix Matrix::operator+(const Matrix& rhs) const {
    if (rows_ != rhs.rows_ || cols_ != rhs.cols_)
        throw DimensionError("Matrix add: shapes differ");
    Matrix r = *this;
    for (std::size_t i = 0; i < data_.size(); ++i) r.data_[i] += rhs.data_[i];
    return r;
}

Matrix Matrix::operator-(const Matrix& rhs) const {
    if (rows_ != rhs.rows_ || cols_ != rhs.cols_)
        throw DimensionError("Matrix subtract: shapes differ");
    Matrix r = *this;
    for (std::size_t i = 0; i < data_.size(); ++i) r.data_[i] -= rhs.data_[i];
    return r;
}

Matrix Matrix::operator*(double s) const {
    Matrix r = *this;
    for (double& v : r.data_) v *= s;
    return r;
}

Vec Matrix::apply(std::span<const double> x) const {
    if (x.size() != cols_) throw DimensionError("Matrix apply: vector length != cols");
    Vec y(rows_, 0.0);
    for (std::size_t i = 0; i < rows_; ++i) {
        double acc = 0.0;
        for (std::size_t j = 0; j < cols_; ++j) acc += (*this)(i, j) * x[j];
        y[i] = acc;
    }
    return y;
}

bool Matrix::is_finite() const {
    return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

double Matrix::max_abs() const {
    double m = 0.0;
    for (double v : data_) m = std::max(m, std::abs(v));
    return m;
}

double Matrix::norm_inf() const {
    double m = 0.0;
    for (std::size_t i = 0; i < rows_; ++i) m = std::max(m, row_abs_sum(i));
    return m;
}

double Matrix::row_abs_sum(std::size_t i) const {
    double s = 0.0;
    for (std::size_t j = 0; j < cols_; ++j) s += std::abs((*this)(i, j));
    return s;
}

Matrix vandermonde(std::size_t n) {
    if (n < 2) throw DimensionError("vandermonde: need n >= 2 (at least two samples)");
    Matrix m(n, n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) m(i, j) = ipow(i, j);  // 0^0 = 1
    return m;
}

Matrix invert(const Matrix& m) {
    if (!m.square()) throw DimensionError("invert: matrix must be square");
    if (!m.is_finite()) throw DomainError("invert: matrix has non-finite entries");
    const std::size_t n = m.rows();
    const double pivot_tol = 1e-13 * std::max(m.max_abs(), 1.0);

    Matrix a = m;
    Matrix inv = Matrix::identity(n);
    for (std::size_t col = 0; col < n; ++col) {
        std::size_t pivot = col;
        double best = std::abs(a(col, col));
        for (std::size_t r = col + 1; r < n; ++r) {
            const double v = std::abs(a(r, col));
            if (v > best) { best = v; pivot = r; }
        }
        if (best <= pivot_tol)
            throw SingularMatrixError("invert: matrix is singular to tolerance");
        if (pivot != col) {
            for (std::size_t j = 0; j < n; ++j) {
                std::swap(a(col, j), a(pivot, j));
                std::swap(inv(col, j), inv(pivot, j));
            }
        }
        const double d = a(col, col);
        for (std::size_t j = 0; j < n; ++j) {
            a(col, j) /= d;
            inv(col, j) /= d;
        }
        for (std::size_t r = 0; r < n; ++r) {
            if (r == col) continue;
            const double f = a(r, col);
            if (f == 0.0) continue;
            for (std::size_t j = 0; j < n; ++j) {
                a(r, j) -= f * a(col, j);
                inv(r, j) -= f * inv(col, j);
            }
        }
    }

    // Newton refinement: keeps the residual near the double-precision floor
    // even for the worst conditioned size in scope (Vandermonde n = 8).
    auto residual = [&](const Matrix& x) { return (m * x - Matrix::identity(n)).norm_inf(); };
    double res = residual(inv);
    for (int sweep = 0; sweep < 3 && res > 1e-14; ++sweep) {
        Matrix candidate = inv + inv * (Matrix::identity(n) - m * inv);
        const double cres = residual(candidate);
        if (cres >= res) break;
        inv = std::move(candidate);
        res = cres;
    }
    return inv;
}

Matrix nilpotent_exp(std::size_t n, double s) {
    if (n < 1) throw DimensionError("nilpotent_exp: need n >= 1");
    if (!std::isfinite(s)) throw DomainError("nilpotent_exp: s must be finite");
    Matrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) {
        double term = 1.0;  // s^(j-i)/(j-i)! accumulated along the row
        m(i, i) = 1.0;
        for (std::size_t j = i + 1; j < n; ++j) {
            term *= s / static_cast<double>(j - i);
            m(i, j) = term;
        }
    }
    return m;
}

namespace {

// Power iteration for the top eigenvalue of the PSD matrix m'm. Runs from
// the all-ones start and from a perturbed ramp and keeps the larger limit:
// a single start can sit in an invariant subspace of a smaller eigenvalue
// and converge there without any other symptom.
double top_eig_gram(const Matrix& m) {
    const std::size_t n = m.cols();
    const Matrix mt = m.transposed();
    auto gram_apply = [&](const Vec& v) { return mt.apply(m.apply(v)); };

    constexpr int kMaxIters = 200000;
    constexpr double kRelTol = 1e-10;

    double best = 0.0;
    for (int attempt = 0; attempt < 2; ++attempt) {
        Vec v(n, 1.0);
        if (attempt == 1)
            for (std::size_t i = 0; i < n; ++i) v[i] = 1.0 + 0.5 * static_cast<double>(i + 1);
        const double nv = norm2(v);
        for (double& x : v) x /= nv;

        double lambda = 0.0;
        bool converged = false;
        for (int it = 0; it < kMaxIters; ++it) {
            Vec w = gram_apply(v);
            const double nw = norm2(w);
            if (nw == 0.0) { converged = true; lambda = 0.0; break; }  // start in the null space
            for (double& x : w) x /= nw;
            const double next = dot(w, gram_apply(w));
            if (it > 0 && std::abs(next - lambda) <= kRelTol * std::max(next, 1e-300)) {
                lambda = next;
                converged = true;
                break;
            }
            lambda = next;
            v = std::move(w);
        }
        if (!converged) throw NumericalFailure("induced_norm2: power iteration did not converge");
        best = std::max(best, lambda);
    }
    return best;
}

} // namespace

double induced_norm2(const Matrix& m) {
    if (!m.is_finite()) throw DomainError("induced_norm2: matrix has non-finite entries");
    if (m.max_abs() == 0.0) return 0.0;
    return std::sqrt(top_eig_gram(m));
}

double sym_eig_max(const Matrix& s) {
    if (!s.square()) throw DimensionError("sym_eig_max: matrix must be square");
    const double rho = induced_norm2(s);
    if (rho == 0.0) return 0.0;
    const Matrix shifted = s + Matrix::identity(s.rows()) * rho;
    return induced_norm2(shifted) - rho;
}

double sym_eig_min(const Matrix& s) {
    return -sym_eig_max(s * -1.0);
}

bool cholesky_spd(const Matrix& s) {
    if (!s.square()) throw DimensionError("cholesky_spd: matrix must be square");
    const std::size_t n = s.rows();
    Matrix l(n, n);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j <= i; ++j) {
            double acc = s(i, j);
            for (std::size_t k = 0; k < j; ++k) acc -= l(i, k) * l(j, k);
            if (i == j) {
                if (acc <= 0.0) return false;
                l(i, i) = std::sqrt(acc);
            } else {
                l(i, j) = acc / l(j, j);
            }
        }
    }
    return true;
}

double dot(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) throw DimensionError("dot: lengths differ");
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

double norm2(std::span<const double> x) {
    double s = 0.0;
    for (double v : x) s += v * v;
    return std::sqrt(s);
}

} // namespace delayfb::linalg
