#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>
#include <string>

#include "delayfb/gains.hpp"
#include "delayfb/simcore.hpp"

using namespace delayfb;
using gains::GainCertificate;
using gains::StepCertificate;
using linalg::Matrix;
using linalg::Vec;

namespace {

// State-feedback closed loop u = k . x on the chain, integrated with a
// plain fourth-order stepper; oracle for the state-feedback fading bound.
std::vector<Vec> simulate_state_feedback(const Vec& k, const Vec& x0,
                                         const std::vector<simcore::Signal>& v, double t_end,
                                         double dt) {
    const std::size_t n = k.size();
    std::vector<Vec> out;
    Vec x = x0;
    out.push_back(x);
    const auto steps = static_cast<long>(std::lround(t_end / dt));
    auto deriv = [&](double t, const Vec& s, Vec& ds) {
        const double u = linalg::dot(k, s);
        for (std::size_t i = 0; i + 1 < n; ++i) ds[i] = s[i + 1] + v[i].eval(t, s);
        ds[n - 1] = v[n - 1].eval(t, s) + u;
    };
    Vec k1(n), k2(n), k3(n), k4(n), w(n);
    for (long i = 0; i < steps; ++i) {
        const double t = static_cast<double>(i) * dt;
        deriv(t, x, k1);
        for (std::size_t j = 0; j < n; ++j) w[j] = x[j] + 0.5 * dt * k1[j];
        deriv(t + 0.5 * dt, w, k2);
        for (std::size_t j = 0; j < n; ++j) w[j] = x[j] + 0.5 * dt * k2[j];
        deriv(t + 0.5 * dt, w, k3);
        for (std::size_t j = 0; j < n; ++j) w[j] = x[j] + dt * k3[j];
        deriv(t + dt, w, k4);
        for (std::size_t j = 0; j < n; ++j)
            x[j] += dt / 6.0 * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j]);
        out.push_back(x);
    }
    return out;
}

GainCertificate tiny_gain_certificate() {
    GainCertificate gc;
    gc.n = 3;
    gc.k = {-1e-6, -1e-6, -1e-6};
    gc.alpha = 1.0;
    gc.beta = 1.0;
    gc.mu = 0.01;
    gc.M0 = 1.0;
    gc.M = {1.0, 1.0, 1.0};
    gc.lyap = Matrix::identity(3);
    return gc;
}

// Small synthetic constant set that keeps every certified quantity finite
// and the scaled design simulatable; exercises the formula plumbing.
GainCertificate fixture_certificate() {
    GainCertificate gc;
    gc.n = 3;
    gc.k = {-1.0, -2.0, -1.0};
    gc.alpha = 1.0;
    gc.beta = 1.0;
    gc.mu = 0.3;
    gc.M0 = 1.5;
    gc.M = {0.3, 0.3, 0.3};
    gc.lyap = Matrix::identity(3);
    return gc;
}

delayop::EstimatorConstants fixture_constants() {
    delayop::EstimatorConstants ec;
    ec.n = 3;
    ec.K0 = 0.01;
    ec.K0_generic = 0.02;
    ec.K = {0.2, 0.2, 0.2};
    return ec;
}

} // namespace

TEST_CASE("worked-example gain verifies at mu = 1/4 with the published witness") {
    const Vec k{-3.0, -5.0, -3.0};
    const GainCertificate gc =
        gains::verify_gain(3, k, 1.0, 1.0, gains::example31_lyapunov(), 0.25);
    CHECK(gc.mu == 0.25);
    CHECK(gc.gain_norm() == doctest::Approx(std::sqrt(43.0)).epsilon(1e-12));
    // Computed conditioning bound sits below the published reference value.
    CHECK(gc.M0 <= std::sqrt(190.0));
    CHECK(gc.M0 > 1.0);
    for (double m : gc.M) CHECK(m > 0.0);

    const GainCertificate preset = gains::example31_certificate();
    CHECK(preset.M0 == doctest::Approx(std::sqrt(190.0)));
    CHECK(preset.M[2] == doctest::Approx(2.0 * std::sqrt(5.0)));
}

TEST_CASE("verify_gain rejects infeasible decay rates and bad witnesses") {
    const Vec k2{-1.0, -2.0};
    const Matrix p =
        gains::solve_lyapunov(Matrix(2, 2, {0.0, 1.0, -1.0, -2.0}), Matrix::identity(2));
    CHECK(linalg::cholesky_spd(p));
    CHECK_NOTHROW(gains::verify_gain(2, k2, 1.0, 1.0, p, 0.05));
    CHECK_THROWS_AS(gains::verify_gain(2, k2, 1.0, 1.0, p, 10.0), NotStabilizingError);
    try {
        gains::verify_gain(2, k2, 1.0, 1.0, p, 10.0);
    } catch (const NotStabilizingError& e) {
        CHECK(std::string(e.what()).find("vertex a = 1") != std::string::npos);
    }
    CHECK_THROWS_AS(gains::verify_gain(2, k2, 1.0, 1.0, Matrix(2, 2, {1, 0, 0, -1}), 0.05),
                    InvalidLyapunovError);
    CHECK_THROWS_AS(gains::verify_gain(2, k2, 1.0, 1.0, Matrix(2, 2, {1, 0.5, 0, 1}), 0.05),
                    InvalidLyapunovError);
    CHECK_THROWS_AS(gains::verify_gain(2, k2, 0.0, 1.0, p, 0.05), DomainError);
}

TEST_CASE("default_gain gives binomial pole placement at -1") {
    CHECK(gains::default_gain(3, 1.0, 1.0) == Vec{-1.0, -3.0, -3.0});
    CHECK(gains::default_gain(1, 1.0, 1.0) == Vec{-1.0});
    CHECK(gains::default_gain(2, 1.0, 1.0) == Vec{-1.0, -2.0});
}

TEST_CASE("step certificate at the published constants") {
    const GainCertificate gc = gains::example31_certificate();
    const delayop::EstimatorConstants ec = delayop::example31_constants();

    SUBCASE("h = 4e-4 admissible") {
        const StepCertificate c = gains::step_certificate(gc, ec, 4.0e-4);
        CHECK(c.valid);
        CHECK(c.cond1 < 1.0);
        CHECK(c.cond2 < 1.0);
        CHECK(c.Q0 > 0.0);
        for (double q : c.Q) CHECK(q > 0.0);
        CHECK(c.Qe > 0.0);
    }

    SUBCASE("h = 0.1 far beyond the certified range") {
        const StepCertificate c = gains::step_certificate(gc, ec, 0.1);
        CHECK_FALSE(c.valid);
        CHECK(c.cond2 > 1.0);
    }

    SUBCASE("first condition matches a hand evaluation at h = 1e-6") {
        const double h = 1e-6;
        const StepCertificate c = gains::step_certificate(gc, ec, h);
        const double hand =
            1.0 * h * std::sqrt(136.0) * std::sqrt(43.0) * std::exp(0.25 * 2.0 * h);
        CHECK(c.cond1 == doctest::Approx(hand).epsilon(1e-14));
        CHECK(c.valid);
    }

    SUBCASE("domain guards") {
        CHECK_THROWS_AS(gains::step_certificate(gc, ec, 0.0), DomainError);
        CHECK_THROWS_AS(gains::step_certificate(gc, ec, 1.5), DomainError);
    }
}

TEST_CASE("max certified step brackets the published conservative bound") {
    const GainCertificate gc = gains::example31_certificate();
    const delayop::EstimatorConstants ec = delayop::example31_constants();
    const double h_star = gains::max_certified_step(gc, ec);
    CHECK(h_star >= 3.9e-4);
    CHECK(h_star <= 4.2e-4);
    CHECK(gains::step_certificate(gc, ec, h_star).valid);
}

TEST_CASE("max certified step caps at one for vanishing gains") {
    CHECK(gains::max_certified_step(tiny_gain_certificate(), delayop::example31_constants()) ==
          1.0);
}

TEST_CASE("max certified step agrees with an exhaustive grid scan") {
    const Vec k = gains::default_gain(2, 1.0, 1.0);
    const GainCertificate gc = gains::auto_certificate(2, k, 1.0, 1.0);
    const delayop::EstimatorConstants ec = delayop::estimator_constants(2);
    const double h_star = gains::max_certified_step(gc, ec);

    const std::size_t grid = 1000000;
    double max_valid = 0.0;
    double min_invalid = 2.0;
    for (std::size_t i = 1; i <= grid; ++i) {
        const double h = static_cast<double>(i) / static_cast<double>(grid);
        if (gains::step_certificate(gc, ec, h).valid)
            max_valid = std::max(max_valid, h);
        else
            min_invalid = std::min(min_invalid, h);
    }
    CHECK(max_valid < min_invalid);  // single threshold on the grid
    CHECK(std::abs(h_star - max_valid) <= 1.0 / grid + 2e-6 * h_star);
}

TEST_CASE("both step conditions increase monotonically in h") {
    struct Case {
        GainCertificate gc;
        delayop::EstimatorConstants ec;
    };
    std::vector<Case> cases;
    cases.push_back({gains::example31_certificate(), delayop::example31_constants()});
    cases.push_back({gains::auto_certificate(2, gains::default_gain(2, 1, 1), 1.0, 1.0),
                     delayop::estimator_constants(2)});
    cases.push_back({gains::auto_certificate(4, gains::default_gain(4, 1, 1), 1.0, 1.0),
                     delayop::estimator_constants(4)});
    for (const Case& c : cases) {
        double prev1 = 0.0;
        double prev2 = 0.0;
        for (int i = 1; i <= 1000; ++i) {
            const double h = static_cast<double>(i) / 1000.0;
            const StepCertificate sc = gains::step_certificate(c.gc, c.ec, h);
            CHECK(sc.cond1 > prev1);
            if (sc.cond1 < 1.0) {  // second condition only meaningful below the pole
                CHECK(sc.cond2 > prev2);
                prev2 = sc.cond2;
            }
            prev1 = sc.cond1;
        }
    }
}

TEST_CASE("measurement-error gain falls with h away from the validity edge") {
    // Qe carries h^(1-n), so it blows up as h -> 0. Near the other end of
    // the admissible range the 1/(1 - cond2) factor takes over and Qe turns
    // upward again, so monotonicity is asserted on (0, h*/2] only.
    const Vec k = gains::default_gain(2, 1.0, 1.0);
    const GainCertificate gc = gains::auto_certificate(2, k, 1.0, 1.0);
    const delayop::EstimatorConstants ec = delayop::estimator_constants(2);
    const double h_star = gains::max_certified_step(gc, ec);

    double prev = std::numeric_limits<double>::infinity();
    for (int i = 1; i <= 200; ++i) {
        const double h = 0.5 * h_star * static_cast<double>(i) / 200.0;
        const StepCertificate c = gains::step_certificate(gc, ec, h);
        REQUIRE(c.valid);
        CHECK(c.Qe <= prev * (1.0 + 1e-9));
        prev = c.Qe;
    }

    // The upward turn near the boundary exists and is expected.
    const double near_edge = gains::step_certificate(gc, ec, 0.999 * h_star).Qe;
    const double mid = gains::step_certificate(gc, ec, 0.6 * h_star).Qe;
    CHECK(near_edge > mid);
}

TEST_CASE("scaled design bookkeeping on a finite synthetic constant set") {
    const GainCertificate gc = fixture_certificate();
    const delayop::EstimatorConstants ec = fixture_constants();
    const double b = 0.25;
    const StepCertificate base = gains::step_certificate(gc, ec, b);
    REQUIRE(base.valid);

    const double gamma = 0.5;
    const double Lhyp = 0.5;
    const double rb = gains::scaling_threshold(base, gamma, Lhyp);
    double qsum = 0.0;
    for (double q : base.Q) qsum += q;
    CHECK(rb == doctest::Approx(1.0 + Lhyp * (base.Q.back() * gamma + qsum)).epsilon(1e-14));

    const double r = 2.0 * rb;
    const gains::ScaledDesign d = gains::scaled_design(gc, ec, b, gamma, Lhyp, 1.0, r);
    CHECK(d.certified);
    CHECK(d.Rb == doctest::Approx(rb).epsilon(1e-14));
    CHECK(d.h == doctest::Approx(b / r).epsilon(1e-14));
    CHECK(d.mu_tilde == doctest::Approx(std::min(1.0 / r, gc.mu)).epsilon(1e-14));
    CHECK(d.pr == doctest::Approx(std::pow(r, 3.0) / (r + 1.0 - rb)).epsilon(1e-12));
    CHECK(d.env_Q ==
          doctest::Approx((1.0 + gamma) * base.Q0 + 1.0 + (1.0 + gamma) * Lhyp * base.Q.back())
              .epsilon(1e-12));
    CHECK(d.env_K == doctest::Approx((1.0 + gamma) * qsum).epsilon(1e-12));
    CHECK(d.env_M == doctest::Approx(base.Qe * (1.0 + gamma)).epsilon(1e-12));

    // Coefficients carry the r^n amplification of the unscaled row.
    const Vec row = gains::feedback_row(gc.k, 3, b);
    for (std::size_t j = 0; j < 3; ++j)
        CHECK(d.feedback_coeffs[j] ==
              doctest::Approx(std::pow(r, 3.0) * row[j]).epsilon(1e-12));

    SUBCASE("scaling below the threshold is rejected and reports it") {
        try {
            gains::scaled_design(gc, ec, b, gamma, Lhyp, 1.0, 0.5 * rb);
            FAIL("expected ScalingTooSmallError");
        } catch (const ScalingTooSmallError& e) {
            CHECK(e.required_threshold == doctest::Approx(rb).epsilon(1e-12));
        }
    }

    SUBCASE("uncertified base step is rejected") {
        CHECK_THROWS_AS(gains::scaled_design(gc, delayop::example31_constants(), 0.5, gamma,
                                             Lhyp, 1.0, 10.0),
                        DomainError);
    }
}

TEST_CASE("true worked-example constants push the scaling threshold past doubles") {
    // The transient constant in the closed-loop gains grows like
    // exp(O(1/h)) for three samples, so at every certified step the Q
    // values and hence R(b) overflow. The threshold gate then rejects any
    // representable scaling.
    const GainCertificate gc = gains::example31_certificate();
    const delayop::EstimatorConstants ec = delayop::example31_constants();
    const double b = 0.9 * gains::max_certified_step(gc, ec);
    const StepCertificate base = gains::step_certificate(gc, ec, b);
    REQUIRE(base.valid);
    CHECK(std::isinf(base.Q0));
    CHECK(std::isinf(base.Qe));

    const gains::CascadeHypothesis hyp = gains::example32_hypothesis();
    const double rb = gains::scaling_threshold(base, hyp.gamma, hyp.Lhyp);
    CHECK(std::isinf(rb));
    CHECK_THROWS_AS(gains::scaled_design(gc, ec, b, hyp.gamma, hyp.Lhyp, hyp.cz, 1e300),
                    ScalingTooSmallError);
}

TEST_CASE("unit scaling collapses to the plain delay feedback row") {
    const Vec k{-3.0, -5.0, -3.0};
    const gains::ScaledDesign d = gains::unchecked_design(k, 3, 0.2, 1.0, 0.5, 2.0, 1.0, 0.25);
    const Vec row = gains::feedback_row(k, 3, 0.2);
    REQUIRE(d.feedback_coeffs.size() == row.size());
    for (std::size_t j = 0; j < row.size(); ++j)
        CHECK(d.feedback_coeffs[j] == row[j]);  // bit-identical at r = 1
    CHECK_FALSE(d.certified);
    CHECK(d.h == doctest::Approx(0.2));
}

TEST_CASE("ISS gain from a polynomial storage function") {
    const auto a = gains::check_A1_via_W(3.0, 2.0, 1.5);  // K = c/2
    CHECK(a.gamma == doctest::Approx(0.5).epsilon(1e-14));
    CHECK(a.decay == doctest::Approx(3.0));

    CHECK(gains::check_A1_via_W(2.0, 1.0, 2.0).gamma == doctest::Approx(1.0));
    CHECK(gains::check_A1_via_W(1.0, 2.0, 4.0).gamma ==
          doctest::Approx(std::sqrt(2.0)).epsilon(1e-14));
    CHECK_THROWS_AS(gains::check_A1_via_W(0.0, 1.0, 1.0), DomainError);

    const auto ex32 = gains::example32_hypothesis();
    CHECK(ex32.gamma == doctest::Approx(0.5));
    CHECK(ex32.Lhyp == doctest::Approx(2.0));
    CHECK(gains::check_A1_via_W(ex32.cz, 2.0, ex32.cz / 2.0).gamma == doctest::Approx(0.5));
}

TEST_CASE("vertex check certifies the whole sector, sampled densely") {
    std::mt19937_64 rng(31);
    std::uniform_real_distribution<double> jitter(-0.15, 0.15);
    std::uniform_real_distribution<double> width(0.02, 0.25);
    int accepted = 0;
    while (accepted < 100) {
        const std::size_t n = 2 + static_cast<std::size_t>(rng() % 3);
        Vec k = gains::default_gain(n, 1.0, 1.0);
        for (double& ki : k) ki *= 1.0 + jitter(rng);
        const double delta = width(rng);
        const double alpha = 1.0 - delta;
        const double beta = 1.0 + delta;
        GainCertificate gc;
        try {
            gc = gains::auto_certificate(n, k, alpha, beta);
        } catch (const NotStabilizingError&) {
            continue;
        }
        ++accepted;
        for (int s = 0; s < 50; ++s) {
            const double a = alpha + (beta - alpha) * s / 49.0;
            Matrix acl(n, n);
            for (std::size_t i = 0; i + 1 < n; ++i) acl(i, i + 1) = 1.0;
            for (std::size_t j = 0; j < n; ++j) acl(n - 1, j) += a * gc.k[j];
            const Matrix res =
                gc.lyap * acl + acl.transposed() * gc.lyap + gc.lyap * (2.0 * gc.mu);
            CHECK(linalg::sym_eig_max(res) <= 1e-9);
        }
    }
}

TEST_CASE("state-feedback trajectories satisfy the certificate's fading bound") {
    std::mt19937_64 rng(77);
    std::uniform_real_distribution<double> uni(-1.0, 1.0);
    std::uniform_real_distribution<double> x0dist(-3.0, 3.0);

    std::vector<GainCertificate> certs;
    certs.push_back(gains::example31_certificate());
    // The same gain with computed (non-preset) constants must satisfy the
    // bound as well, even though the constants differ numerically.
    certs.push_back(gains::verify_gain(3, Vec{-3.0, -5.0, -3.0}, 1.0, 1.0,
                                       gains::example31_lyapunov(), 0.25));
    certs.push_back(gains::auto_certificate(2, gains::default_gain(2, 1, 1), 1.0, 1.0));

    for (const GainCertificate& gc : certs) {
        const std::size_t n = gc.n;
        const double dt = 1e-3;
        const double t_end = 8.0;
        for (int run = 0; run < 50; ++run) {
            std::vector<simcore::Signal> v;
            for (std::size_t c = 0; c < n; ++c)
                v.push_back(
                    simcore::Signal::sinusoid(uni(rng), 0.5 + std::abs(uni(rng)), uni(rng)));
            Vec x0(n);
            for (double& x : x0) x = x0dist(rng);

            const std::vector<Vec> traj = simulate_state_feedback(gc.k, x0, v, t_end, dt);
            std::vector<double> sup(n, 0.0);
            const double decay = std::exp(-gc.mu * dt);
            const double x0n = linalg::norm2(x0);
            std::size_t violations = 0;
            for (std::size_t i = 0; i < traj.size(); ++i) {
                const double t = static_cast<double>(i) * dt;
                for (std::size_t c = 0; c < n; ++c)
                    sup[c] = std::max(i == 0 ? 0.0 : sup[c] * decay,
                                      std::abs(v[c].eval(t, traj[i])));
                double rhs = gc.M0 * std::exp(-gc.mu * t) * x0n;
                for (std::size_t c = 0; c < n; ++c) rhs += gc.M[c] * sup[c];
                if (linalg::norm2(traj[i]) > rhs * (1.0 + 1e-9)) ++violations;
            }
            CHECK(violations == 0);
        }
    }
}

TEST_CASE("a certified step yields an exponentially decaying delay loop") {
    const GainCertificate gc = gains::example31_certificate();
    const delayop::EstimatorConstants ec = delayop::example31_constants();
    const double h_star = gains::max_certified_step(gc, ec);
    const double h = std::min(4e-4, h_star);

    simcore::ChainScenario sc;
    sc.plant = simcore::example31_plant();
    sc.k = gc.k;
    sc.h = h;
    sc.history = simcore::example31_history();
    sc.t_end = 10.0;
    sc.dt_div = 8;
    const simcore::Trajectory traj = simcore::run(sc);
    CHECK_FALSE(traj.diverged);

    // Log-linear fit of |x(t)| on [2, 10] must slope downward.
    double sxx = 0.0, sx = 0.0, sy = 0.0, sxy = 0.0;
    double m = 0.0;
    for (std::size_t i = 0; i < traj.times.size(); ++i) {
        if (traj.times[i] < 2.0) continue;
        const double nx = linalg::norm2(traj.x[i]);
        if (nx <= 0.0) continue;
        const double lx = std::log(nx);
        sx += traj.times[i];
        sy += lx;
        sxx += traj.times[i] * traj.times[i];
        sxy += traj.times[i] * lx;
        m += 1.0;
    }
    const double slope = (m * sxy - sx * sy) / (m * sxx - sx * sx);
    CHECK(slope < 0.0);
    CHECK(linalg::norm2(traj.x.back()) < 1e-2);
}
