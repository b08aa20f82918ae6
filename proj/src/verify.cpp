#include "delayfb/verify.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include "delayfb/delayop.hpp"

namespace delayfb::verify {

namespace {

constexpr double kRatioSlack = 1e-9;

double ratio_of(double lhs, double rhs) {
    if (rhs > 0.0) return lhs / rhs;
    return lhs <= 1e-12 ? 0.0 : std::numeric_limits<double>::infinity();
}

// The certified gains can legitimately overflow to +inf (their transient
// constant is exp(O(h^(2-n)))); a zero-weight term must still contribute
// zero rather than inf * 0 = NaN.
double safe_term(double coef, double factor) {
    return factor > 0.0 ? coef * factor : 0.0;
}

// Supremum of exp(-mu (0 - tau)) |e(tau)| over the history interval
// [-span, 0], sampled at dt.
double history_weighted_sup(const simcore::Signal& e, double span, double dt, double mu) {
    const long cells = std::lround(span / dt);
    const double decay = std::exp(-mu * dt);
    double s = std::abs(e.eval(-span));
    for (long j = 1; j <= cells; ++j) {
        const double theta = -span + static_cast<double>(j) * dt;
        s = std::max(s * decay, std::abs(e.eval(theta)));
    }
    return s;
}

} // namespace

std::vector<double> running_weighted_sup(std::span<const double> values, double mu, double dt,
                                         double seed_sup) {
    std::vector<double> out(values.size());
    const double decay = std::exp(-mu * dt);
    double s = seed_sup;
    for (std::size_t i = 0; i < values.size(); ++i) {
        s = std::max(i == 0 ? s : s * decay, std::abs(values[i]));
        out[i] = s;
    }
    return out;
}

CheckReport check_fading_memory(const simcore::Trajectory& traj,
                                const gains::StepCertificate& cert,
                                const gains::GainCertificate& gc,
                                const std::vector<simcore::Signal>& v,
                                const simcore::Signal& e) {
    if (!cert.valid) throw ConfigError("check_fading_memory: step certificate is not valid");
    if (std::abs(traj.h - cert.h) > 1e-12 * std::max(traj.h, cert.h))
        throw ConfigError("check_fading_memory: trajectory h differs from certificate h");
    if (traj.n != gc.n) throw ConfigError("check_fading_memory: dimension mismatch");
    if (!v.empty() && v.size() != gc.n)
        throw ConfigError("check_fading_memory: disturbance list must have n entries");

    const std::size_t n = gc.n;
    const double mu = gc.mu;
    const double dt = traj.dt;
    const std::size_t npts = traj.times.size();
    const double span = static_cast<double>(n - 1) * traj.h;

    // Per-channel disturbance suprema on the trajectory grid.
    std::vector<std::vector<double>> sv(n);
    for (std::size_t i = 0; i < n; ++i) {
        std::vector<double> vals(npts, 0.0);
        if (!v.empty())
            for (std::size_t j = 0; j < npts; ++j) vals[j] = v[i].eval(traj.times[j], traj.x[j]);
        sv[i] = running_weighted_sup(vals, mu, dt);
    }

    // Measurement error supremum, seeded from the history interval.
    std::vector<double> evals(npts);
    for (std::size_t j = 0; j < npts; ++j) evals[j] = e.eval(traj.times[j]);
    const double eseed = history_weighted_sup(e, span, dt, mu);
    const std::vector<double> se = running_weighted_sup(evals, mu, dt, eseed);

    CheckReport rep;
    rep.points = npts;
    for (std::size_t j = 0; j < npts; ++j) {
        const double t = traj.times[j];
        double rhs = safe_term(cert.Q0, std::exp(-mu * t) * traj.history_sup_norm);
        for (std::size_t i = 0; i < n; ++i) rhs += safe_term(cert.Q[i], sv[i][j]);
        rhs += safe_term(cert.Qe, se[j]);
        const double lhs = linalg::norm2(traj.x[j]);
        const double ratio = ratio_of(lhs, rhs);
        if (ratio > rep.max_ratio) {
            rep.max_ratio = ratio;
            rep.worst_time = t;
        }
    }
    rep.pass = rep.max_ratio <= 1.0 + kRatioSlack;
    return rep;
}

CheckReport check_cascade_envelope(const simcore::Trajectory& traj,
                                   const gains::ScaledDesign& design,
                                   const std::function<double(std::span<const double>)>& V,
                                   const std::function<double(double)>& a_of,
                                   const std::vector<simcore::Signal>& v,
                                   const simcore::Signal& e) {
    if (!design.certified)
        throw ConfigError("check_cascade_envelope: design is not certified");
    if (std::abs(traj.h - design.h) > 1e-12 * std::max(traj.h, design.h))
        throw ConfigError("check_cascade_envelope: trajectory h differs from design h");
    if (traj.kz == 0) throw ConfigError("check_cascade_envelope: trajectory has no z states");
    if (!v.empty() && v.size() != traj.n)
        throw ConfigError("check_cascade_envelope: disturbance list must have n entries");

    const double rate = design.mu_tilde * design.r;
    const double dt = traj.dt;
    const std::size_t npts = traj.times.size();
    const double span = static_cast<double>(traj.n - 1) * traj.h;

    // Weighted supremum of the full disturbance vector magnitude.
    std::vector<double> vmag(npts, 0.0);
    if (!v.empty()) {
        for (std::size_t j = 0; j < npts; ++j) {
            double s = 0.0;
            for (const simcore::Signal& vi : v) {
                const double val = vi.eval(traj.times[j], traj.x[j]);
                s += val * val;
            }
            vmag[j] = std::sqrt(s);
        }
    }
    const std::vector<double> sv = running_weighted_sup(vmag, rate, dt);

    std::vector<double> evals(npts);
    for (std::size_t j = 0; j < npts; ++j) evals[j] = e.eval(traj.times[j]);
    const double eseed = history_weighted_sup(e, span, dt, rate);
    const std::vector<double> se = running_weighted_sup(evals, rate, dt, eseed);

    CheckReport rep;
    rep.points = npts;
    const double z0mag = linalg::norm2(traj.z.front());
    const double head =
        safe_term(design.env_Q, design.pr * traj.history_sup_norm + a_of(z0mag));
    for (std::size_t j = 0; j < npts; ++j) {
        const double t = traj.times[j];
        const double lhs = linalg::norm2(traj.x[j]) + V(traj.z[j]);
        const double rhs = safe_term(head, std::exp(-rate * t)) +
                           safe_term(design.pr / design.r * design.env_K, sv[j]) +
                           safe_term(design.pr * design.env_M, se[j]);
        const double ratio = ratio_of(lhs, rhs);
        if (ratio > rep.max_ratio) {
            rep.max_ratio = ratio;
            rep.worst_time = t;
        }
    }
    rep.pass = rep.max_ratio <= 1.0 + kRatioSlack;
    return rep;
}

EstimatorBoundReport check_estimator_bound(std::size_t n, double h, std::size_t runs,
                                           std::uint64_t seed) {
    const delayop::EstimatorConstants ec =
        (n == 3) ? delayop::example31_constants() : delayop::estimator_constants(n);
    const delayop::DelayOperator op = delayop::build_delay_operator(n, h);

    const long m = 16;  // substeps per delay interval
    const double dt = h / static_cast<double>(m);
    const double t_end = 6.0;
    // Breakpoints of the random inputs land on the integration grid.
    const long seg_cells = std::max<long>(1, std::lround(0.25 / dt));

    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unit(-1.0, 1.0);
    std::uniform_real_distribution<double> init(-2.0, 2.0);

    EstimatorBoundReport rep;
    rep.runs = runs;
    const long total_cells = std::lround(t_end / dt);

    for (std::size_t run = 0; run < runs; ++run) {
        std::vector<simcore::Signal> u;
        std::vector<std::vector<double>> node_vals(n);
        for (std::size_t ch = 0; ch < n; ++ch) {
            std::vector<std::pair<double, double>> pts;
            double val = unit(rng);
            for (long cell = 0; cell <= total_cells + seg_cells; cell += seg_cells) {
                pts.emplace_back(static_cast<double>(cell) * dt, val);
                val = unit(rng);
            }
            u.push_back(simcore::Signal::piecewise_linear(pts));
            node_vals[ch].resize(total_cells + 1);
            for (long j = 0; j <= total_cells; ++j)
                node_vals[ch][j] = std::abs(u[ch].eval(static_cast<double>(j) * dt));
        }
        linalg::Vec x0(n);
        for (double& xi : x0) xi = init(rng);

        const simcore::Trajectory traj = simcore::open_loop_chain(n, u, x0, t_end, dt);

        const long window = static_cast<long>(n - 1) * m;
        linalg::Vec samples(n);
        for (long j = window; j <= total_cells; ++j) {
            for (std::size_t s = 0; s < n; ++s)
                samples[s] = traj.x[j - static_cast<long>(s) * m][0];
            const linalg::Vec est = delayop::apply(op, samples);

            double err2 = 0.0;
            for (std::size_t c = 0; c < n; ++c) {
                const double dth = traj.x[j][c] - est[c];
                err2 += dth * dth;
            }
            const double lhs = std::sqrt(err2);

            double rhs = 0.0;
            for (std::size_t ch = 1; ch <= n; ++ch) {
                double sup = 0.0;
                for (long q = j - window; q <= j; ++q)
                    sup = std::max(sup, node_vals[ch - 1][q]);
                rhs += ec.K[ch - 1] *
                       std::pow(h, static_cast<double>(ch) + 1.0 - static_cast<double>(n)) * sup;
            }
            const double ratio = ratio_of(lhs, rhs);
            rep.worst_ratio = std::max(rep.worst_ratio, ratio);
            if (lhs > rhs * (1.0 + kRatioSlack)) ++rep.violations;
        }
    }
    rep.pass = rep.violations == 0;
    return rep;
}

StabilityClass classify_stability(const simcore::ChainScenario& sc, double h,
                                  const ClassifierOptions& opts) {
    simcore::ChainScenario unforced = sc;
    unforced.h = h;
    unforced.v.clear();
    unforced.e = simcore::Signal::zero();
    unforced.t_end = opts.t_end;
    unforced.dt_div = opts.dt_div;

    simcore::SimOptions sim;
    sim.bail_norm = opts.blowup * 1e3;  // far enough past the threshold to be definitive
    const simcore::Trajectory traj = simcore::run(unforced, sim);

    if (traj.diverged || traj.sup_norm_x > opts.blowup) return StabilityClass::Unstable;
    const double final_norm = linalg::norm2(traj.x.back());
    if (final_norm < opts.decay_factor * traj.history_sup_norm) return StabilityClass::Stable;
    return StabilityClass::Marginal;
}

double empirical_max_step(const simcore::ChainScenario& sc, double h_lo, double h_hi,
                          const ClassifierOptions& opts) {
    if (!(h_lo > 0.0) || !(h_lo < h_hi))
        throw BadBracketError("empirical_max_step: need 0 < h_lo < h_hi");
    if (classify_stability(sc, h_lo, opts) != StabilityClass::Stable)
        throw BadBracketError("empirical_max_step: h_lo does not classify stable");
    if (classify_stability(sc, h_hi, opts) == StabilityClass::Stable)
        throw BadBracketError("empirical_max_step: h_hi classifies stable");

    double lo = h_lo;
    double hi = h_hi;
    while (hi - lo > 5e-3) {
        const double mid = 0.5 * (lo + hi);
        if (classify_stability(sc, mid, opts) == StabilityClass::Stable)
            lo = mid;
        else
            hi = mid;  // marginal outcomes shrink toward the unstable side
    }
    return 0.5 * (lo + hi);
}

const char* to_string(StabilityClass c) {
    switch (c) {
        case StabilityClass::Stable: return "stable";
        case StabilityClass::Marginal: return "marginal";
        case StabilityClass::Unstable: return "unstable";
    }
    return "?";
}

} // namespace delayfb::verify
