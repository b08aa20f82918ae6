#pragma once

// Empirical verification of the certified estimates: fading-memory bounds
// on simulated trajectories, the estimator error bound under random
// bounded inputs, and bisection for the empirical maximum stable step.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "delayfb/gains.hpp"
#include "delayfb/simcore.hpp"

namespace delayfb::verify {

/// Outcome of an inequality check over a trajectory grid: the worst
/// left/right ratio, where it occurred, and pass iff the ratio stays at
/// or below one (up to 1e-9 relative slack absorbing integrator error).
struct CheckReport {
    bool pass = false;
    double max_ratio = 0.0;
    double worst_time = 0.0;
    std::size_t points = 0;
};

/// Running weighted supremum S(t) = sup_{tau <= t} exp(-mu (t - tau)) g(tau)
/// over uniformly sampled values, computed by the one-pass recursion
/// S_i = max(exp(-mu dt) S_{i-1}, |g_i|). seed_sup folds in the supremum
/// accumulated before the first sample.
std::vector<double> running_weighted_sup(std::span<const double> values, double mu, double dt,
                                         double seed_sup = 0.0);

/// Checks the chain fading-memory estimate on a closed-loop trajectory:
/// |x(t)| against the decayed initial-history term plus the weighted
/// suprema of each disturbance channel and of the measurement error (the
/// error supremum starts on the history interval). The trajectory's h
/// must match the certificate's.
CheckReport check_fading_memory(const simcore::Trajectory& traj,
                                const gains::StepCertificate& cert,
                                const gains::GainCertificate& gc,
                                const std::vector<simcore::Signal>& v,
                                const simcore::Signal& e);

/// Checks the cascade envelope |x(t)| + V(z(t)) against the scaled
/// design's exponential bound with its envelope constants. Requires a
/// certified design. The driving signals enter the bound's weighted
/// suprema; omit them for unforced runs.
CheckReport check_cascade_envelope(const simcore::Trajectory& traj,
                                   const gains::ScaledDesign& design,
                                   const std::function<double(std::span<const double>)>& V,
                                   const std::function<double(double)>& a_of,
                                   const std::vector<simcore::Signal>& v = {},
                                   const simcore::Signal& e = {});

struct EstimatorBoundReport {
    bool pass = false;
    double worst_ratio = 0.0;
    std::size_t violations = 0;
    std::size_t runs = 0;
};

/// Monte-Carlo check of the estimator error bound: random bounded-input
/// open-loop chain runs, asserting at every grid time past the estimator
/// window that the reconstruction error stays below the constant-weighted
/// windowed input suprema. Uses the worked-example constants for n = 3
/// and the generic ones otherwise.
EstimatorBoundReport check_estimator_bound(std::size_t n, double h, std::size_t runs,
                                           std::uint64_t seed = 2024);

enum class StabilityClass { Stable, Marginal, Unstable };

struct ClassifierOptions {
    double t_end = 200.0;
    double decay_factor = 1e-2;  // stable: final |x| below this times the history sup
    double blowup = 1e6;         // unstable: |x| ever exceeds this
    int dt_div = 32;
};

/// Classifies the unforced (v = 0, e = 0) closed loop at step h.
StabilityClass classify_stability(const simcore::ChainScenario& sc, double h,
                                  const ClassifierOptions& opts = {});

/// Bisection on the classifier boundary to absolute tolerance 5e-3;
/// marginal outcomes shrink toward the unstable side. Requires h_lo to
/// classify stable and h_hi non-stable.
double empirical_max_step(const simcore::ChainScenario& sc, double h_lo, double h_hi,
                          const ClassifierOptions& opts = {});

const char* to_string(StabilityClass c);

} // namespace delayfb::verify
