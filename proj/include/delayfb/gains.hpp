#pragma once

// Design and certification: robust state-feedback verification through a
// quadratic Lyapunov vertex condition, admissible-step conditions for the
// delay feedback, closed-loop gain estimates, and the high-gain scaling
// construction for the cascade design.

#include <cstddef>
#include <vector>

#include "delayfb/delayop.hpp"
#include "delayfb/linalg.hpp"

namespace delayfb::gains {

/// Robust state-feedback certificate for the uncertain integrator chain
/// with control gain a(d, x) confined to [alpha, beta]. Valid instances
/// carry the decay rate mu and the fading-memory constants M0, M1..Mn.
struct GainCertificate {
    std::size_t n = 0;
    linalg::Vec k;           // feedback vector, u = k . x
    double alpha = 1.0;
    double beta = 1.0;
    double mu = 0.0;         // certified exponential decay rate
    double M0 = 0.0;
    std::vector<double> M;   // M_1 ... M_n, per-disturbance-channel gains
    linalg::Matrix lyap{1, 1};  // symmetric positive definite witness

    double gain_norm() const { return linalg::norm2(k); }
};

/// Result of evaluating the two step-size conditions at a given h. The
/// certificate is valid iff both left sides are below one; in that case
/// the closed-loop gains Q0, Q1..Qn, Qe of the fading-memory estimate are
/// filled in along with the intermediates c and Lrem. Lrem grows like
/// exp(O(h^(2-n))), so for n >= 3 the gains can legitimately evaluate to
/// +inf at certified steps; consumers treat them as valid upper bounds.
struct StepCertificate {
    double h = 0.0;
    double cond1 = 0.0;      // beta h K_n |k| exp(mu (n-1) h)
    double cond2 = 0.0;      // h K_n M_n beta^2 |k|^2 exp(mu (n-1) h) / (1 - cond1)^2
    bool valid = false;
    double c = 0.0;          // delay-error feedback contraction factor
    double Lrem = 0.0;       // initial-transient amplification constant
    double Q0 = 0.0;
    std::vector<double> Q;   // Q_1 ... Q_n
    double Qe = 0.0;
};

/// High-gain scaled design: base step b certified, scaling r > R(b),
/// effective step h = b/r, and the per-sample feedback coefficients
/// realizing u = coeffs . (y(t), y(t-h), ..., y(t-(n-1)h)).
struct ScaledDesign {
    std::size_t n = 0;
    double b = 0.0;
    double r = 1.0;
    double Rb = 0.0;         // 1 + Lhyp (Q_n gamma + sum_i Q_i)
    double h = 0.0;          // b / r
    double Lhyp = 0.0;       // growth constant of the interconnection terms
    double gamma = 0.0;      // ISS gain of the z-subsystem
    double cz = 0.0;         // z-subsystem decay rate
    double mu = 0.0;         // decay rate of the gain certificate
    double mu_tilde = 0.0;   // min(cz / r, mu)
    double pr = 0.0;         // r^n / (r + 1 - Rb)
    linalg::Vec feedback_coeffs;
    double env_Q = 0.0;      // envelope constants of the cascade estimate
    double env_K = 0.0;
    double env_M = 0.0;
    StepCertificate base;    // certificate at step b
    bool certified = false;  // false for plumbing designs built without the step gate
};

/// Checks the vertex Lyapunov inequality
///   lyap Acl(a) + Acl(a)' lyap <= -2 mu lyap   for a in {alpha, beta}
/// where Acl(a) = A + a b k' on the integrator chain; the closed-loop
/// matrix is affine in a, so the two vertices cover the whole sector.
/// On success derives M0 = sqrt(lmax/lmin) and the per-channel gains
/// M_i = M0 |lyap| / (mu lmin) from the standard quadratic-Lyapunov
/// comparison argument.
GainCertificate verify_gain(std::size_t n, const linalg::Vec& k, double alpha, double beta,
                            const linalg::Matrix& lyap, double mu);

/// Feedback placing all nominal (a = 1) closed-loop poles at -1:
/// k_i = -binomial(n, i-1). The sector bounds are accepted for signature
/// compatibility; callers must still run verify_gain.
linalg::Vec default_gain(std::size_t n, double alpha, double beta);

/// Evaluates both step conditions at h and, when both hold, the
/// closed-loop gain estimates. An inadmissible step is a result, not an
/// error.
StepCertificate step_certificate(const GainCertificate& gc,
                                 const delayop::EstimatorConstants& ec, double h);

/// Largest h in (0, 1] with a valid step certificate, by bisection to
/// relative tolerance 1e-6 with floor 1e-12. Throws InfeasibleStepError
/// when no admissible step exists above the floor.
double max_certified_step(const GainCertificate& gc, const delayop::EstimatorConstants& ec);

/// Builds the scaled cascade design. Requires the base step b to be
/// certified and r > R(b); R(b) is reported in the error otherwise.
ScaledDesign scaled_design(const GainCertificate& gc, const delayop::EstimatorConstants& ec,
                           double b, double gamma, double Lhyp, double cz, double r);

/// Plumbing constructor: the same feedback coefficients and bookkeeping
/// without the certification gate (Rb, p(r) and the envelope constants
/// are left zero, certified = false). Used to run simulation scenarios at
/// steps far beyond the conservative certified range.
ScaledDesign unchecked_design(const linalg::Vec& k, std::size_t n, double b, double r,
                              double gamma, double Lhyp, double cz, double mu);

/// Per-sample coefficients of u = k . (state estimate) at step h:
/// the row vector k' diag(1, 1!/(-h), ..., (n-1)!/(-h)^(n-1)) P^{-1}
/// applied to (y(t), y(t-h), ..., y(t-(n-1)h)).
linalg::Vec feedback_row(const linalg::Vec& k, std::size_t n, double h);

struct IssGainFromW {
    double gamma;
    double decay;
};

/// ISS gain of a z-subsystem certified by a differentiable W with
/// grad W . f <= -2 c p W + K |x|^p: yields gamma = (K/(c p))^(1/p) and
/// decay rate c for V = W^(1/p).
IssGainFromW check_A1_via_W(double c, double p, double K);

/// Solves M' P + P M = -Q for symmetric P by vectorizing into an
/// n^2 x n^2 linear system. M must be Hurwitz for a positive definite
/// solution.
linalg::Matrix solve_lyapunov(const linalg::Matrix& m, const linalg::Matrix& q);

/// Certifies (n, k) over the sector [alpha, beta] without a user-supplied
/// witness: P solves the Lyapunov equation for the midpoint gain, the
/// admissible decay rate is bisected over both vertices, and mu is set to
/// half of it (the M-constant derivation needs that slack).
GainCertificate auto_certificate(std::size_t n, const linalg::Vec& k, double alpha, double beta);

/// R(b) = 1 + Lhyp (Q_n gamma + sum_i Q_i) from a valid step certificate.
double scaling_threshold(const StepCertificate& cert, double gamma, double Lhyp);

/// Named presets of the worked three-integrator example: k = (-3,-5,-3),
/// sector [1,1], mu = 1/4, the published M0 = sqrt(190), M3 = 2 sqrt(5),
/// and the Lyapunov witness 1/2 x1^2 + 1/2 (x2+x1)^2 + 1/2 (x3+2x2+2x1)^2.
/// M1, M2 are filled from the computed certificate (the source example
/// does not list them).
GainCertificate example31_certificate();

linalg::Matrix example31_lyapunov();

/// Hypothesis constants of the worked cascade example: gamma = 1/2,
/// interconnection growth Lhyp = 2, z-decay cz = 1.
struct CascadeHypothesis {
    double gamma;
    double Lhyp;
    double cz;
};

CascadeHypothesis example32_hypothesis();

} // namespace delayfb::gains
