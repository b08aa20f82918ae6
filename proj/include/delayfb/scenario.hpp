#pragma once

// Scenario ingestion: a human-editable sectioned key-value format that
// pins down the plant, gain, step, signals, initial history, and run
// horizon. The worked-example setups ship as built-ins so nothing needs
// external files.

#include <cstddef>
#include <string>
#include <vector>

#include "delayfb/gains.hpp"
#include "delayfb/simcore.hpp"

namespace delayfb::cli {

struct Scenario {
    // [plant]
    std::string plant_kind = "chain";  // chain | example31 | example32
    std::size_t n = 3;

    // [gain]
    bool use_default_gain = false;
    linalg::Vec k;
    double mu = 0.25;
    double alpha = 1.0;
    double beta = 1.0;
    std::string lyapunov = "auto";  // auto | example31

    // [step]
    bool certify_step = false;  // pick h = max certified step
    double h = 0.1;

    // [cascade]
    linalg::Vec z0;
    double gamma = 0.5;
    double Lhyp = 2.0;
    double cz = 1.0;
    double r = 1.0;

    // [signals]
    std::vector<simcore::Signal> v;  // per channel; empty = all zero
    simcore::Signal e;
    std::vector<simcore::Signal> d;

    // [history]
    std::vector<simcore::Signal> history;  // per state component

    // [run]
    double t_end = 10.0;
    int dt_div = 32;

    bool is_cascade() const { return plant_kind == "example32"; }
    bool operator==(const Scenario&) const = default;
};

/// Built-in scenarios: "example31" (three-integrator loop, h = 0.1,
/// unforced, the published initial history), "example32" (the nonlinear
/// cascade with z0 = 2, d1 = sgn(x2), d2 = 1), and "chainN" for N in
/// 2..8 (default gain, auto certification).
Scenario builtin_scenario(const std::string& name);

bool is_builtin_scenario(const std::string& name);

/// Parses the sectioned key-value text. Throws ConfigError on malformed
/// input, unknown keys, or missing coverage.
Scenario parse_scenario(const std::string& text);

/// Canonical serialization; parse(serialize(s)) == s field for field.
std::string serialize_scenario(const Scenario& s);

/// Resolves a built-in name or reads a scenario file.
Scenario load_scenario(const std::string& name_or_path);

// Derived artifacts.
gains::GainCertificate certificate_for(const Scenario& s);
delayop::EstimatorConstants constants_for(const Scenario& s);
simcore::ChainScenario chain_setup(const Scenario& s);
simcore::CascadeScenario cascade_setup(const Scenario& s);

/// CSV with header t,x1,...,xn[,z1..zkz],u,y and 17 significant digits.
std::string trajectory_csv(const simcore::Trajectory& traj);

} // namespace delayfb::cli
