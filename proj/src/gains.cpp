#include "delayfb/gains.hpp"

#include <cmath>
#include <sstream>

namespace delayfb::gains {

namespace {

constexpr double kVertexTol = 1e-9;
constexpr double kSymTol = 1e-12;
constexpr double kStepFloor = 1e-12;

double factorial(std::size_t n) {
    double r = 1.0;
    for (std::size_t k = 2; k <= n; ++k) r *= static_cast<double>(k);
    return r;
}

linalg::Matrix shift_matrix(std::size_t n) {
    linalg::Matrix a(n, n);
    for (std::size_t i = 0; i + 1 < n; ++i) a(i, i + 1) = 1.0;
    return a;
}

// Acl(a) = A + a b k' with b = (0,...,0,1)': the gain enters the last row.
linalg::Matrix closed_loop(std::size_t n, const linalg::Vec& k, double a) {
    linalg::Matrix acl = shift_matrix(n);
    for (std::size_t j = 0; j < n; ++j) acl(n - 1, j) += a * k[j];
    return acl;
}

double binomial(std::size_t n, std::size_t j) {
    double r = 1.0;
    for (std::size_t i = 0; i < j; ++i)
        r = r * static_cast<double>(n - i) / static_cast<double>(i + 1);
    return r;
}

} // namespace

GainCertificate verify_gain(std::size_t n, const linalg::Vec& k, double alpha, double beta,
                            const linalg::Matrix& lyap, double mu) {
    if (k.size() != n) throw DimensionError("verify_gain: gain vector length != n");
    if (!(alpha > 0.0) || !(alpha <= beta))
        throw DomainError("verify_gain: need 0 < alpha <= beta");
    if (!(mu > 0.0)) throw DomainError("verify_gain: decay rate mu must be positive");
    if (!lyap.square() || lyap.rows() != n)
        throw DimensionError("verify_gain: Lyapunov matrix must be n x n");

    const double scale = std::max(lyap.max_abs(), 1.0);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j)
            if (std::abs(lyap(i, j) - lyap(j, i)) > kSymTol * scale)
                throw InvalidLyapunovError("verify_gain: Lyapunov matrix is not symmetric");
    if (!linalg::cholesky_spd(lyap))
        throw InvalidLyapunovError("verify_gain: Lyapunov matrix is not positive definite");

    for (double a : {alpha, beta}) {
        const linalg::Matrix acl = closed_loop(n, k, a);
        const linalg::Matrix residual =
            lyap * acl + acl.transposed() * lyap + lyap * (2.0 * mu);
        const double top = linalg::sym_eig_max(residual);
        if (top > kVertexTol) {
            std::ostringstream msg;
            msg << "verify_gain: Lyapunov decrease fails at sector vertex a = " << a
                << " (top residual eigenvalue " << top << ")";
            throw NotStabilizingError(msg.str());
        }
    }

    const double lmax = linalg::sym_eig_max(lyap);
    const double lmin = linalg::sym_eig_min(lyap);
    const double m0 = std::sqrt(lmax / lmin);
    const double mi = m0 * linalg::induced_norm2(lyap) / (mu * lmin);
    return GainCertificate{n, k, alpha, beta, mu, m0, std::vector<double>(n, mi), lyap};
}

linalg::Vec default_gain(std::size_t n, double /*alpha*/, double /*beta*/) {
    if (n < 1 || n > delayop::kMaxOrder)
        throw DimensionError("default_gain: dimension n must lie in [1, 8]");
    linalg::Vec k(n);
    for (std::size_t i = 0; i < n; ++i) k[i] = -binomial(n, i);
    return k;
}

StepCertificate step_certificate(const GainCertificate& gc,
                                 const delayop::EstimatorConstants& ec, double h) {
    if (!(h > 0.0) || h > 1.0)
        throw DomainError("step_certificate: step h must lie in (0, 1]");
    if (ec.n != gc.n) throw DimensionError("step_certificate: dimension mismatch");

    const std::size_t n = gc.n;
    const double nd = static_cast<double>(n);
    const double beta = gc.beta;
    const double knorm = gc.gain_norm();
    const double Kn = ec.K.back();
    const double Mn = gc.M.back();
    const double mu = gc.mu;
    const double E = std::exp(mu * (nd - 1.0) * h);

    StepCertificate sc;
    sc.h = h;
    sc.cond1 = beta * h * Kn * knorm * E;
    const double denom = 1.0 - sc.cond1;
    sc.cond2 = h * Kn * Mn * beta * beta * knorm * knorm * E / (denom * denom);
    sc.valid = sc.cond1 < 1.0 && sc.cond2 < 1.0;
    if (!sc.valid) return sc;

    const double K0 = ec.K0;
    const double h_pow = std::pow(h, 1.0 - nd);  // h^(1-n)
    sc.c = h * Kn * E / (denom * denom);
    sc.Lrem = (1.0 + K0 * h_pow) * std::exp(2.0 * (nd + beta * knorm * h_pow * K0 + mu) * (nd - 1.0) * h);

    const double D = 1.0 - sc.c * Mn * beta * beta * knorm * knorm;  // = 1 - cond2 > 0
    sc.Q0 = gc.M0 + Mn * beta * knorm * (sc.c * gc.M0 * beta * knorm + nd * sc.Lrem) / D;
    sc.Q.resize(n);
    for (std::size_t i = 1; i <= n; ++i) {
        const double Ki = ec.K[i - 1];
        const double Mi = gc.M[i - 1];
        const double hi = std::pow(h, static_cast<double>(i) - nd);  // h^(i-n)
        sc.Q[i - 1] = Mi + Mn * beta * knorm *
                               (sc.c * (Ki * hi + Kn * beta * knorm * Mi) + sc.Lrem * Kn) / (D * Kn);
    }
    sc.Qe = Mn * h_pow * K0 * beta * knorm *
            (E + beta * knorm * (sc.c * (Mn * beta * knorm * E + 1.0) + sc.Lrem * E) / D);
    return sc;
}

double max_certified_step(const GainCertificate& gc, const delayop::EstimatorConstants& ec) {
    auto admissible = [&](double h) { return step_certificate(gc, ec, h).valid; };

    if (admissible(1.0)) return 1.0;
    if (!admissible(kStepFloor))
        throw InfeasibleStepError("max_certified_step: no admissible step above the floor");

    double lo = kStepFloor;  // admissible
    double hi = 1.0;         // inadmissible
    while (hi - lo > 1e-6 * hi) {
        const double mid = 0.5 * (lo + hi);
        if (admissible(mid)) lo = mid; else hi = mid;
    }
    return lo;
}

linalg::Vec feedback_row(const linalg::Vec& k, std::size_t n, double h) {
    if (k.size() != n) throw DimensionError("feedback_row: gain vector length != n");
    if (!(h > 0.0) || h > 1.0) throw DomainError("feedback_row: step h must lie in (0, 1]");
    const linalg::Matrix pinv = linalg::invert(linalg::vandermonde(n));
    std::vector<double> diag(n);
    for (std::size_t i = 0; i < n; ++i)
        diag[i] = factorial(i) / std::pow(-h, static_cast<double>(i));
    const linalg::Matrix op = linalg::Matrix::diagonal(diag) * pinv;

    linalg::Vec coeffs(n, 0.0);
    for (std::size_t j = 0; j < n; ++j) {
        double acc = 0.0;
        for (std::size_t i = 0; i < n; ++i) acc += k[i] * op(i, j);
        coeffs[j] = acc;
    }
    return coeffs;
}

namespace {

linalg::Vec scaled_feedback_coeffs(const linalg::Vec& k, std::size_t n, double b, double r) {
    linalg::Vec coeffs = feedback_row(k, n, b);
    const double rn = std::pow(r, static_cast<double>(n));
    for (double& c : coeffs) c *= rn;
    return coeffs;
}

} // namespace

ScaledDesign scaled_design(const GainCertificate& gc, const delayop::EstimatorConstants& ec,
                           double b, double gamma, double Lhyp, double cz, double r) {
    if (gamma < 0.0 || Lhyp < 0.0 || !(cz > 0.0))
        throw DomainError("scaled_design: need gamma >= 0, Lhyp >= 0, cz > 0");
    StepCertificate base = step_certificate(gc, ec, b);
    if (!base.valid)
        throw DomainError("scaled_design: base step b is not certified");

    double qsum = 0.0;
    for (double q : base.Q) qsum += q;
    const double rb = scaling_threshold(base, gamma, Lhyp);
    if (!(r > rb)) {
        std::ostringstream msg;
        msg << "scaled_design: scaling r = " << r << " must exceed R(b) = " << rb;
        throw ScalingTooSmallError(msg.str(), rb);
    }

    ScaledDesign d;
    d.n = gc.n;
    d.b = b;
    d.r = r;
    d.Rb = rb;
    d.h = b / r;
    d.Lhyp = Lhyp;
    d.gamma = gamma;
    d.cz = cz;
    d.mu = gc.mu;
    d.mu_tilde = std::min(cz / r, gc.mu);
    d.pr = std::pow(r, static_cast<double>(gc.n)) / (r + 1.0 - rb);
    d.feedback_coeffs = scaled_feedback_coeffs(gc.k, gc.n, b, r);
    d.env_Q = (1.0 + gamma) * base.Q0 + 1.0 + (1.0 + gamma) * Lhyp * base.Q.back();
    d.env_K = (1.0 + gamma) * qsum;
    d.env_M = base.Qe * (1.0 + gamma);
    d.base = std::move(base);
    d.certified = true;
    return d;
}

ScaledDesign unchecked_design(const linalg::Vec& k, std::size_t n, double b, double r,
                              double gamma, double Lhyp, double cz, double mu) {
    if (k.size() != n) throw DimensionError("unchecked_design: gain vector length != n");
    if (!(b > 0.0) || b > 1.0) throw DomainError("unchecked_design: base step must lie in (0, 1]");
    if (!(r >= 1.0)) throw DomainError("unchecked_design: scaling r must be >= 1");

    ScaledDesign d;
    d.n = n;
    d.b = b;
    d.r = r;
    d.h = b / r;
    d.Lhyp = Lhyp;
    d.gamma = gamma;
    d.cz = cz;
    d.mu = mu;
    d.mu_tilde = std::min(cz / r, mu);
    d.feedback_coeffs = scaled_feedback_coeffs(k, n, b, r);
    d.certified = false;
    return d;
}

IssGainFromW check_A1_via_W(double c, double p, double K) {
    if (!(c > 0.0) || !(p > 0.0) || !(K > 0.0))
        throw DomainError("check_A1_via_W: constants must be positive");
    return IssGainFromW{std::pow(K / (c * p), 1.0 / p), c};
}

linalg::Matrix solve_lyapunov(const linalg::Matrix& m, const linalg::Matrix& q) {
    if (!m.square() || !q.square() || m.rows() != q.rows())
        throw DimensionError("solve_lyapunov: shapes must match and be square");
    const std::size_t n = m.rows();
    const std::size_t n2 = n * n;

    // Unknowns are vec(P) in row-major order; one equation per entry (i,j).
    linalg::Matrix sys(n2, n2);
    linalg::Vec rhs(n2);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            const std::size_t eq = i * n + j;
            // (M' P)(i,j) = sum_k M(k,i) P(k,j)
            for (std::size_t k = 0; k < n; ++k) sys(eq, k * n + j) += m(k, i);
            // (P M)(i,j) = sum_k P(i,k) M(k,j)
            for (std::size_t k = 0; k < n; ++k) sys(eq, i * n + k) += m(k, j);
            rhs[eq] = -q(i, j);
        }
    }
    const linalg::Vec p = linalg::invert(sys).apply(rhs);
    linalg::Matrix out(n, n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j)
            out(i, j) = 0.5 * (p[i * n + j] + p[j * n + i]);  // symmetrize round-off
    return out;
}

GainCertificate auto_certificate(std::size_t n, const linalg::Vec& k, double alpha, double beta) {
    if (k.size() != n) throw DimensionError("auto_certificate: gain vector length != n");
    if (!(alpha > 0.0) || !(alpha <= beta))
        throw DomainError("auto_certificate: need 0 < alpha <= beta");

    const linalg::Matrix acl_mid = closed_loop(n, k, 0.5 * (alpha + beta));
    const linalg::Matrix p = solve_lyapunov(acl_mid, linalg::Matrix::identity(n));
    if (!linalg::cholesky_spd(p))
        throw NotStabilizingError("auto_certificate: midpoint closed loop is not Hurwitz");

    auto vertices_hold = [&](double mu) {
        for (double a : {alpha, beta}) {
            const linalg::Matrix acl = closed_loop(n, k, a);
            const linalg::Matrix res = p * acl + acl.transposed() * p + p * (2.0 * mu);
            if (linalg::sym_eig_max(res) > 0.0) return false;
        }
        return true;
    };
    if (!vertices_hold(1e-9))
        throw NotStabilizingError("auto_certificate: sector vertices fail for this witness");

    double lo = 1e-9, hi = 16.0;
    while (vertices_hold(hi)) hi *= 2.0;  // decay rates this large do not occur at our scales
    for (int it = 0; it < 80; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (vertices_hold(mid)) lo = mid; else hi = mid;
    }
    return verify_gain(n, k, alpha, beta, p, 0.5 * lo);
}

double scaling_threshold(const StepCertificate& cert, double gamma, double Lhyp) {
    if (!cert.valid) throw DomainError("scaling_threshold: certificate is not valid");
    double qsum = 0.0;
    for (double q : cert.Q) qsum += q;
    return 1.0 + Lhyp * (cert.Q.back() * gamma + qsum);
}

linalg::Matrix example31_lyapunov() {
    return linalg::Matrix(3, 3,
                          {3.0, 2.5, 1.0,
                           2.5, 2.5, 1.0,
                           1.0, 1.0, 0.5});
}

GainCertificate example31_certificate() {
    const linalg::Vec k{-3.0, -5.0, -3.0};
    GainCertificate gc = verify_gain(3, k, 1.0, 1.0, example31_lyapunov(), 0.25);
    gc.M0 = std::sqrt(190.0);
    gc.M[2] = 2.0 * std::sqrt(5.0);
    return gc;
}

CascadeHypothesis example32_hypothesis() {
    return CascadeHypothesis{0.5, 2.0, 1.0};
}

} // namespace delayfb::gains
