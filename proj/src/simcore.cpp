#include "delayfb/simcore.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace delayfb::simcore {

namespace {

// dt must divide h with at least four substeps per delay interval.
long substeps_per_delay(double h, double dt) {
    const double ratio = h / dt;
    const long m = std::lround(ratio);
    if (m < 4 || std::abs(static_cast<double>(m) * dt - h) > 1e-9 * h) {
        std::ostringstream msg;
        msg << "integration step dt = " << dt << " must divide the delay step h = " << h
            << " with at least 4 substeps";
        throw GridMismatchError(msg.str());
    }
    return m;
}

long step_count(double t_end, double dt) {
    if (!(t_end > 0.0)) throw DomainError("simulate: t_end must be positive");
    const long steps = std::lround(t_end / dt);
    return std::max<long>(steps, 1);
}

bool all_finite(std::span<const double> v) {
    return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

void check_sector(double a, double alpha, double beta) {
    const double slack = 1e-12 * std::max(1.0, beta);
    if (a < alpha - slack || a > beta + slack) {
        std::ostringstream msg;
        msg << "control gain a = " << a << " left the sector [" << alpha << ", " << beta << "]";
        throw ContractViolation(msg.str());
    }
}

// One classical fourth-order step of s' = f(t, s).
template <typename Deriv>
void rk4_step(Deriv&& f, double t, double dt, Vec& s, Vec& k1, Vec& k2, Vec& k3, Vec& k4,
              Vec& work) {
    const std::size_t n = s.size();
    f(t, s, k1);
    for (std::size_t i = 0; i < n; ++i) work[i] = s[i] + 0.5 * dt * k1[i];
    f(t + 0.5 * dt, work, k2);
    for (std::size_t i = 0; i < n; ++i) work[i] = s[i] + 0.5 * dt * k2[i];
    f(t + 0.5 * dt, work, k3);
    for (std::size_t i = 0; i < n; ++i) work[i] = s[i] + dt * k3[i];
    f(t + dt, work, k4);
    for (std::size_t i = 0; i < n; ++i)
        s[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
}

std::vector<Signal> zero_signals(std::size_t n) { return std::vector<Signal>(n); }

Vec eval_signals(const std::vector<Signal>& sigs, double t, std::span<const double> x) {
    Vec out(sigs.size());
    for (std::size_t i = 0; i < sigs.size(); ++i) out[i] = sigs[i].eval(t, x);
    return out;
}

} // namespace

ChainPlant chain_plant(std::size_t n) {
    return ChainPlant{n, 1.0, 1.0,
                      [](std::span<const double>, std::span<const double>) { return 1.0; }};
}

ChainPlant example31_plant() { return chain_plant(3); }

CascadePlant example32_plant() {
    CascadePlant p;
    p.n = 3;
    p.kz = 1;
    p.alpha = 1.0;
    p.beta = 1.0;
    p.f = [](std::span<const double> d, std::span<const double> z, std::span<const double> x,
             std::span<double> dz) {
        const double d1 = d.empty() ? 0.0 : d[0];
        dz[0] = -z[0] - z[0] * z[0] * z[0] + d1 * x[1];
    };
    p.g = [](std::size_t i, std::span<const double> d, std::span<const double> z,
             std::span<const double>) {
        if (i < 3) return 0.0;
        const double d2 = d.size() > 1 ? d[1] : 0.0;
        return d2 * z[0] * z[0];
    };
    p.a = [](std::span<const double>, std::span<const double>, std::span<const double>) {
        return 1.0;
    };
    return p;
}

InitialHistory::InitialHistory(std::vector<Signal> components)
    : components_(std::move(components)) {
    for (const Signal& s : components_)
        if (s.state_dependent())
            throw DomainError("InitialHistory: components must not be state-dependent");
}

InitialHistory InitialHistory::constant(const Vec& x0) {
    std::vector<Signal> comps;
    comps.reserve(x0.size());
    for (double v : x0) comps.push_back(Signal::constant(v));
    return InitialHistory(std::move(comps));
}

Vec InitialHistory::state_at(double theta) const {
    Vec x(components_.size());
    for (std::size_t i = 0; i < components_.size(); ++i) x[i] = components_[i].eval(theta);
    return x;
}

double InitialHistory::output_at(double theta) const {
    if (components_.empty()) throw DimensionError("InitialHistory: empty");
    return components_[0].eval(theta);
}

double InitialHistory::sup_norm(double span, double dt) const {
    double best = 0.0;
    const long cells = std::lround(span / dt);
    for (long j = 0; j <= cells; ++j) {
        const Vec x = state_at(-span + static_cast<double>(j) * dt);
        best = std::max(best, linalg::norm2(x));
    }
    return best;
}

InitialHistory example31_history() {
    std::vector<Signal> comps;
    comps.push_back(Signal::piecewise_linear({{-0.2, 0.0}, {-0.1, 0.0}, {0.0, 1.0}}));
    comps.push_back(Signal::constant(1.0));
    comps.push_back(Signal::constant(1.0));
    return InitialHistory(std::move(comps));
}

DelayBuffer::DelayBuffer(Vec newest_first) : samples_(std::move(newest_first)) {
    if (samples_.empty()) throw DimensionError("DelayBuffer: needs at least one sample");
}

void DelayBuffer::push(double newest) {
    for (std::size_t j = samples_.size() - 1; j > 0; --j) samples_[j] = samples_[j - 1];
    samples_[0] = newest;
}

Vec Trajectory::x_at(double t) const {
    if (times.empty()) throw DomainError("Trajectory: empty");
    if (t <= times.front()) return x.front();
    if (t >= times.back()) return x.back();
    const double pos = (t - times.front()) / dt;
    const auto i0 = static_cast<std::size_t>(pos);
    const double frac = pos - static_cast<double>(i0);
    Vec out(n);
    for (std::size_t c = 0; c < n; ++c)
        out[c] = x[i0][c] + frac * (x[i0 + 1][c] - x[i0][c]);
    return out;
}

namespace {

// Shared closed-loop integration for the chain and the cascade; kz = 0
// selects the pure chain. The control is refreshed at delay ticks from
// the buffered samples and held in between.
struct LoopSpec {
    std::size_t n;
    std::size_t kz;
    double alpha;
    double beta;
    const std::vector<Signal>* v;
    const Signal* e;
    const std::vector<Signal>* d;
    // Fills the full state derivative; u is the held control value.
    std::function<void(double t, std::span<const double> s, double u, Vec& ds)> deriv;
};

Trajectory integrate_loop(const LoopSpec& spec, const Vec& coeffs, double h,
                          const InitialHistory& x0, const Vec& z0, double t_end, double dt,
                          const SimOptions& opts) {
    const std::size_t n = spec.n;
    const std::size_t kz = spec.kz;
    if (x0.dimension() != n)
        throw DimensionError("simulate: initial history dimension != n");
    if (!spec.v->empty() && spec.v->size() != n)
        throw DimensionError("simulate: disturbance list must have n entries (or be empty)");
    const long m = substeps_per_delay(h, dt);
    const double dte = h / static_cast<double>(m);
    const long steps = step_count(t_end, dte);

    Trajectory traj;
    traj.n = n;
    traj.kz = kz;
    traj.h = h;
    traj.dt = dte;
    traj.history_sup_norm = x0.sup_norm(static_cast<double>(n - 1) * h, dte);
    traj.times.reserve(steps + 1);
    traj.x.reserve(steps + 1);
    traj.u.reserve(steps + 1);
    traj.y.reserve(steps + 1);
    if (kz > 0) traj.z.reserve(steps + 1);

    Vec state(kz + n);
    for (std::size_t i = 0; i < kz; ++i) state[i] = z0[i];
    {
        const Vec xinit = x0.state_at(0.0);
        for (std::size_t i = 0; i < n; ++i) state[kz + i] = xinit[i];
    }

    Vec ring(n);
    ring[0] = state[kz] + spec.e->eval(0.0);
    for (std::size_t j = 1; j < n; ++j) {
        const double theta = -static_cast<double>(j) * h;
        ring[j] = x0.output_at(theta) + spec.e->eval(theta);
    }
    DelayBuffer buf(std::move(ring));
    double u_held = linalg::dot(coeffs, buf.samples());

    auto record = [&](double t, double y) {
        traj.times.push_back(t);
        traj.x.emplace_back(state.begin() + static_cast<long>(kz), state.end());
        if (kz > 0) traj.z.emplace_back(state.begin(), state.begin() + static_cast<long>(kz));
        traj.u.push_back(u_held);
        traj.y.push_back(y);
        traj.sup_norm_x = std::max(traj.sup_norm_x, linalg::norm2(traj.x.back()));
    };
    record(0.0, buf.samples()[0]);

    Vec k1(kz + n), k2(kz + n), k3(kz + n), k4(kz + n), work(kz + n);
    auto deriv = [&](double t, std::span<const double> s, Vec& ds) {
        spec.deriv(t, s, u_held, ds);
    };

    for (long i = 0; i < steps; ++i) {
        const double t = static_cast<double>(i) * dte;
        rk4_step(deriv, t, dte, state, k1, k2, k3, k4, work);
        const double t1 = static_cast<double>(i + 1) * dte;
        if (!all_finite(state)) {
            traj.diverged = true;
            traj.first_bad_time = t1;
            break;
        }
        const double y1 = state[kz] + spec.e->eval(t1);
        if ((i + 1) % m == 0) {
            buf.push(y1);
            u_held = linalg::dot(coeffs, buf.samples());
        }
        record(t1, y1);
        if (traj.sup_norm_x > opts.bail_norm) break;
    }
    return traj;
}

} // namespace

Trajectory simulate_chain(const ChainPlant& plant, const Vec& k, double h,
                          const InitialHistory& x0, const std::vector<Signal>& v,
                          const Signal& e, const std::vector<Signal>& d, double t_end,
                          double dt, const SimOptions& opts) {
    const std::size_t n = plant.n;
    if (k.size() != n) throw DimensionError("simulate_chain: gain vector length != n");
    const Vec coeffs = gains::feedback_row(k, n, h);

    LoopSpec spec;
    spec.n = n;
    spec.kz = 0;
    spec.alpha = plant.alpha;
    spec.beta = plant.beta;
    spec.v = &v;
    spec.e = &e;
    spec.d = &d;
    spec.deriv = [&plant, &v, &d, n](double t, std::span<const double> s, double u, Vec& ds) {
        const Vec dvals = eval_signals(d, t, s);
        const double a = plant.a(dvals, s);
        check_sector(a, plant.alpha, plant.beta);
        for (std::size_t i = 0; i + 1 < n; ++i)
            ds[i] = s[i + 1] + (v.empty() ? 0.0 : v[i].eval(t, s));
        ds[n - 1] = (v.empty() ? 0.0 : v[n - 1].eval(t, s)) + a * u;
    };
    return integrate_loop(spec, coeffs, h, x0, Vec{}, t_end, dt, opts);
}

Trajectory simulate_cascade(const CascadePlant& plant, const gains::ScaledDesign& design,
                            const Vec& z0, const InitialHistory& x0,
                            const std::vector<Signal>& v, const Signal& e,
                            const std::vector<Signal>& d, double t_end, double dt,
                            const SimOptions& opts) {
    const std::size_t n = plant.n;
    const std::size_t kz = plant.kz;
    if (design.n != n) throw DimensionError("simulate_cascade: design dimension != plant n");
    if (z0.size() != kz) throw DimensionError("simulate_cascade: z0 length != kz");

    LoopSpec spec;
    spec.n = n;
    spec.kz = kz;
    spec.alpha = plant.alpha;
    spec.beta = plant.beta;
    spec.v = &v;
    spec.e = &e;
    spec.d = &d;
    spec.deriv = [&plant, &v, &d, n, kz](double t, std::span<const double> s, double u, Vec& ds) {
        const std::span<const double> z = s.subspan(0, kz);
        const std::span<const double> x = s.subspan(kz, n);
        const Vec dvals = eval_signals(d, t, x);
        plant.f(dvals, z, x, std::span<double>(ds.data(), kz));
        const double a = plant.a(dvals, z, x);
        check_sector(a, plant.alpha, plant.beta);
        for (std::size_t i = 0; i + 1 < n; ++i)
            ds[kz + i] = plant.g(i + 1, dvals, z, x) + x[i + 1] +
                         (v.empty() ? 0.0 : v[i].eval(t, x));
        ds[kz + n - 1] = plant.g(n, dvals, z, x) +
                         (v.empty() ? 0.0 : v[n - 1].eval(t, x)) + a * u;
    };
    return integrate_loop(spec, design.feedback_coeffs, design.h, x0, z0, t_end, dt, opts);
}

Trajectory open_loop_chain(std::size_t n, const std::vector<Signal>& u, const Vec& x0,
                           double t_end, double dt) {
    if (x0.size() != n) throw DimensionError("open_loop_chain: x0 length != n");
    if (u.size() != n) throw DimensionError("open_loop_chain: input list must have n entries");
    if (!(dt > 0.0)) throw DomainError("open_loop_chain: dt must be positive");
    const long steps = step_count(t_end, dt);

    Trajectory traj;
    traj.n = n;
    traj.dt = dt;
    traj.times.reserve(steps + 1);
    traj.x.reserve(steps + 1);

    Vec state = x0;
    auto record = [&](double t) {
        traj.times.push_back(t);
        traj.x.push_back(state);
        traj.u.push_back(0.0);
        traj.y.push_back(state[0]);
        traj.sup_norm_x = std::max(traj.sup_norm_x, linalg::norm2(state));
    };
    record(0.0);

    Vec k1(n), k2(n), k3(n), k4(n), work(n);
    auto deriv = [&](double t, std::span<const double> s, Vec& ds) {
        for (std::size_t i = 0; i + 1 < n; ++i) ds[i] = s[i + 1] + u[i].eval(t, s);
        ds[n - 1] = u[n - 1].eval(t, s);
    };
    for (long i = 0; i < steps; ++i) {
        rk4_step(deriv, static_cast<double>(i) * dt, dt, state, k1, k2, k3, k4, work);
        const double t1 = static_cast<double>(i + 1) * dt;
        if (!all_finite(state)) {
            traj.diverged = true;
            traj.first_bad_time = t1;
            break;
        }
        record(t1);
    }
    return traj;
}

Trajectory run(const ChainScenario& sc, const SimOptions& opts) {
    const std::vector<Signal> v = sc.v.empty() ? zero_signals(sc.plant.n) : sc.v;
    return simulate_chain(sc.plant, sc.k, sc.h, sc.history, v, sc.e, sc.d, sc.t_end,
                          sc.h / sc.dt_div, opts);
}

Trajectory run(const CascadeScenario& sc, const SimOptions& opts) {
    const std::vector<Signal> v = sc.v.empty() ? zero_signals(sc.plant.n) : sc.v;
    return simulate_cascade(sc.plant, sc.design, sc.z0, sc.history, v, sc.e, sc.d, sc.t_end,
                            sc.design.h / sc.dt_div, opts);
}

} // namespace delayfb::simcore
