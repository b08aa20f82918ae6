#pragma once

// Time signals used as disturbances, measurement noise, and uncertainty
// inputs. A signal evaluates at any time (including negative times, for
// initial-history intervals); the state-sign kind reads the current state
// vector instead and realizes switching uncertainties like sgn(x2(t)).

#include <cstddef>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "delayfb/errors.hpp"

namespace delayfb::simcore {

class Signal {
public:
    enum class Kind { Zero, Constant, Sinusoid, PiecewiseLinear, StateSign, Table };

    Signal() : kind_(Kind::Zero) {}

    static Signal zero() { return Signal(); }
    static Signal constant(double value);
    /// amplitude * sin(omega t + phase)
    static Signal sinusoid(double amplitude, double omega, double phase);
    /// Linear interpolation through (time, value) breakpoints, clamped to
    /// the end values outside the breakpoint range. Times strictly increasing.
    static Signal piecewise_linear(std::vector<std::pair<double, double>> points);
    /// sgn of state component `index` (1-based); sgn(0) = 0.
    static Signal state_sign(std::size_t index);
    /// Tabulated (time, value) grid with linear interpolation, clamped ends.
    static Signal table(std::vector<std::pair<double, double>> points);

    Kind kind() const { return kind_; }
    bool state_dependent() const { return kind_ == Kind::StateSign; }

    double eval(double t, std::span<const double> state = {}) const;

    // Accessors for serialization.
    double value() const { return value_; }
    double amplitude() const { return amplitude_; }
    double omega() const { return omega_; }
    double phase() const { return phase_; }
    std::size_t index() const { return index_; }
    const std::vector<std::pair<double, double>>& points() const { return points_; }

    bool operator==(const Signal&) const = default;

private:
    Kind kind_;
    double value_ = 0.0;
    double amplitude_ = 0.0;
    double omega_ = 0.0;
    double phase_ = 0.0;
    std::size_t index_ = 0;
    std::vector<std::pair<double, double>> points_;
};

} // namespace delayfb::simcore
