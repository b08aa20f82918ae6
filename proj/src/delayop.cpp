#include "delayfb/delayop.hpp"

#include <cmath>

namespace delayfb::delayop {

namespace {

double factorial(std::size_t n) {
    double r = 1.0;
    for (std::size_t k = 2; k <= n; ++k) r *= static_cast<double>(k);
    return r;
}

void check_order(std::size_t n) {
    if (n < 2 || n > kMaxOrder)
        throw DimensionError("delayop: dimension n must lie in [2, 8]");
}

// max over s in [0, n-1] of |exp(As)|. The norm is nondecreasing in s for
// the shift matrix A; the grid check asserts that instead of assuming it,
// then a ternary search refines around the best grid point.
double max_exp_shift_norm(std::size_t n) {
    const double s_max = static_cast<double>(n - 1);
    constexpr std::size_t kGrid = 1000;
    double prev = 0.0;
    double best = 0.0;
    double best_s = 0.0;
    for (std::size_t i = 0; i < kGrid; ++i) {
        const double s = s_max * static_cast<double>(i) / static_cast<double>(kGrid - 1);
        const double v = linalg::induced_norm2(linalg::nilpotent_exp(n, s));
        if (v + 1e-12 < prev)
            throw NumericalFailure("estimator_constants: |exp(As)| not nondecreasing on grid");
        prev = v;
        if (v > best) { best = v; best_s = s; }
    }
    const double step = s_max / static_cast<double>(kGrid - 1);
    double lo = std::max(0.0, best_s - step);
    double hi = std::min(s_max, best_s + step);
    while (hi - lo > 1e-6) {
        const double m1 = lo + (hi - lo) / 3.0;
        const double m2 = hi - (hi - lo) / 3.0;
        const double v1 = linalg::induced_norm2(linalg::nilpotent_exp(n, m1));
        const double v2 = linalg::induced_norm2(linalg::nilpotent_exp(n, m2));
        if (v1 < v2) lo = m1; else hi = m2;
        best = std::max(best, std::max(v1, v2));
    }
    return best;
}

} // namespace

DelayOperator build_delay_operator(std::size_t n, double h) {
    check_order(n);
    if (!(h > 0.0) || h > 1.0)
        throw DomainError("build_delay_operator: step h must lie in (0, 1]");

    const linalg::Matrix pinv = linalg::invert(linalg::vandermonde(n));
    std::vector<double> diag(n);
    for (std::size_t i = 0; i < n; ++i)
        diag[i] = factorial(i) / std::pow(-h, static_cast<double>(i));
    linalg::Matrix coeff = linalg::Matrix::diagonal(diag) * pinv;
    return DelayOperator{n, h, std::move(coeff)};
}

linalg::Vec apply(const DelayOperator& op, std::span<const double> samples) {
    if (samples.size() != op.n)
        throw DimensionError("delayop::apply: sample count != n");
    for (double v : samples)
        if (!std::isfinite(v)) throw DomainError("delayop::apply: samples must be finite");
    return op.coeff.apply(samples);
}

EstimatorConstants estimator_constants(std::size_t n) {
    check_order(n);
    const linalg::Matrix pinv = linalg::invert(linalg::vandermonde(n));
    const double pinv_norm = linalg::induced_norm2(pinv);
    const double sqrt_n = std::sqrt(static_cast<double>(n));
    const double fac = factorial(n - 1);

    const double k0_generic = sqrt_n * pinv_norm * fac;

    // Tightened bound: component i of h^(n-1) * Delta y is at most
    // (i-1)! * h^(n-i) * rowabssum_i(P^{-1}) * sup|y|, and h^(n-i) <= 1.
    double row_max = 0.0;
    for (std::size_t i = 0; i < n; ++i)
        row_max = std::max(row_max, factorial(i) * pinv.row_abs_sum(i));
    const double k0_tight = sqrt_n * row_max;

    const double exp_max = max_exp_shift_norm(n);
    const double n1 = static_cast<double>(n - 1);
    std::vector<double> k(n);
    for (std::size_t j = 1; j <= n; ++j) {
        k[j - 1] = n1 * sqrt_n * pinv_norm * fac * std::pow(n1, static_cast<double>(j)) / factorial(j)
                 + n1 * exp_max;
    }
    return EstimatorConstants{n, k0_tight, k0_generic, std::move(k)};
}

EstimatorConstants example31_constants() {
    EstimatorConstants c = estimator_constants(3);
    c.K0 = 4.0 * std::sqrt(3.0);
    c.K[2] = std::sqrt(136.0);
    return c;
}

} // namespace delayfb::delayop
