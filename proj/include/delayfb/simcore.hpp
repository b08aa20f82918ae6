#pragma once

// Deterministic fixed-step method-of-steps integration of the delay
// closed loops. The measured output is buffered on the delay grid; the
// control is recomputed from the n buffered samples at every delay tick
// t = 0, h, 2h, ... and held constant in between (the sampled realization
// of the feedback; see the empirical step-boundary scenario). Classical
// fourth-order stepping with dt dividing h, so every delayed sample falls
// exactly on a stored grid node.

#include <cstddef>
#include <functional>
#include <limits>
#include <span>
#include <vector>

#include "delayfb/gains.hpp"
#include "delayfb/linalg.hpp"
#include "delayfb/signal.hpp"

namespace delayfb::simcore {

using linalg::Vec;

/// Uncertain integrator chain: dx_i = x_{i+1} + v_i, dx_n = v_n + a(d,x) u.
/// The gain function a must stay inside [alpha, beta]; every evaluation is
/// checked and a violation aborts the run.
struct ChainPlant {
    std::size_t n;
    double alpha;
    double beta;
    std::function<double(std::span<const double> d, std::span<const double> x)> a;
};

/// Cascade with ISS z-subsystem:
///   dz   = f(d, z, x)
///   dx_i = g_i(d, z, x) + x_{i+1} + v_i
///   dx_n = g_n(d, z, x) + a(d, z, x) u + v_n
struct CascadePlant {
    std::size_t n;
    std::size_t kz;
    double alpha;
    double beta;
    std::function<void(std::span<const double> d, std::span<const double> z,
                       std::span<const double> x, std::span<double> dz)>
        f;
    std::function<double(std::size_t i, std::span<const double> d, std::span<const double> z,
                         std::span<const double> x)>
        g;  // i in 1..n
    std::function<double(std::span<const double> d, std::span<const double> z,
                         std::span<const double> x)>
        a;
};

ChainPlant chain_plant(std::size_t n);   // a == 1, sector [1, 1]
ChainPlant example31_plant();            // three integrators, a == 1
CascadePlant example32_plant();          // dz = -z - z^3 + d1 x2, g_n = d2 z^2

/// Initial history: one signal per state component, evaluated at
/// theta <= 0. Components must not be state-dependent.
class InitialHistory {
public:
    explicit InitialHistory(std::vector<Signal> components);
    static InitialHistory constant(const Vec& x0);

    std::size_t dimension() const { return components_.size(); }
    Vec state_at(double theta) const;
    double output_at(double theta) const;  // first component only

    /// sup of |x(theta)| over [-span, 0] sampled at resolution dt.
    double sup_norm(double span, double dt) const;

    const std::vector<Signal>& components() const { return components_; }
    bool operator==(const InitialHistory&) const = default;

private:
    std::vector<Signal> components_;
};

/// The published initial data of the worked examples: x1 ramps from 0 at
/// theta = -0.1 to 1 at theta = 0 (zero before), x2 = x3 = 1.
InitialHistory example31_history();

/// Newest-first ring of the n buffered output samples, aligned to
/// multiples of h.
class DelayBuffer {
public:
    explicit DelayBuffer(Vec newest_first);
    void push(double newest);
    std::span<const double> samples() const { return samples_; }

private:
    Vec samples_;
};

struct Trajectory {
    std::size_t n = 0;
    std::size_t kz = 0;                  // 0 for pure chains
    double h = 0.0;                      // delay step (0 for open-loop runs)
    double dt = 0.0;
    std::vector<double> times;
    std::vector<Vec> x;
    std::vector<Vec> z;                  // empty unless kz > 0
    std::vector<double> u;
    std::vector<double> y;               // measured output x1 + e
    bool diverged = false;
    double first_bad_time = 0.0;
    double sup_norm_x = 0.0;             // over the recorded nodes
    double history_sup_norm = 0.0;       // sup |x(theta)| over the history interval

    /// Linear interpolation of x between grid nodes.
    Vec x_at(double t) const;
};

struct SimOptions {
    /// Abort integration once |x| exceeds this (the trajectory keeps the
    /// nodes recorded so far and sup_norm_x reflects the excursion).
    double bail_norm = std::numeric_limits<double>::infinity();
};

/// Closed-loop chain under the delay output feedback u = k . estimate.
/// Requires dt = h/m with integer m >= 4; x0 must cover [-(n-1)h, 0].
Trajectory simulate_chain(const ChainPlant& plant, const Vec& k, double h,
                          const InitialHistory& x0, const std::vector<Signal>& v,
                          const Signal& e, const std::vector<Signal>& d, double t_end,
                          double dt, const SimOptions& opts = {});

/// Closed-loop cascade under the scaled feedback of the design
/// (h = design.h). Returns z alongside x.
Trajectory simulate_cascade(const CascadePlant& plant, const gains::ScaledDesign& design,
                            const Vec& z0, const InitialHistory& x0,
                            const std::vector<Signal>& v, const Signal& e,
                            const std::vector<Signal>& d, double t_end, double dt,
                            const SimOptions& opts = {});

/// Driven open chain dx_i = x_{i+1} + u_i, dx_n = u_n (no feedback).
Trajectory open_loop_chain(std::size_t n, const std::vector<Signal>& u, const Vec& x0,
                           double t_end, double dt);

/// A full chain simulation setup minus the step size; used by sweeps and
/// the empirical step-boundary search.
struct ChainScenario {
    ChainPlant plant;
    Vec k;
    double h = 0.1;
    InitialHistory history{std::vector<Signal>{}};
    std::vector<Signal> v;
    Signal e;
    std::vector<Signal> d;
    double t_end = 10.0;
    int dt_div = 32;
};

Trajectory run(const ChainScenario& sc, const SimOptions& opts = {});

struct CascadeScenario {
    CascadePlant plant;
    gains::ScaledDesign design;
    Vec z0;
    InitialHistory history{std::vector<Signal>{}};
    std::vector<Signal> v;
    Signal e;
    std::vector<Signal> d;
    double t_end = 15.0;
    int dt_div = 32;
};

Trajectory run(const CascadeScenario& sc, const SimOptions& opts = {});

} // namespace delayfb::simcore
