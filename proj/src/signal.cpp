#include "delayfb/signal.hpp"

#include <cmath>

namespace delayfb::simcore {

namespace {

void check_points(const std::vector<std::pair<double, double>>& pts, const char* what) {
    if (pts.empty()) throw DomainError(std::string(what) + ": needs at least one breakpoint");
    for (std::size_t i = 1; i < pts.size(); ++i)
        if (!(pts[i - 1].first < pts[i].first))
            throw DomainError(std::string(what) + ": times must be strictly increasing");
}

double interp(const std::vector<std::pair<double, double>>& pts, double t) {
    if (t <= pts.front().first) return pts.front().second;
    if (t >= pts.back().first) return pts.back().second;
    std::size_t hi = 1;
    while (pts[hi].first < t) ++hi;
    const auto& [t0, v0] = pts[hi - 1];
    const auto& [t1, v1] = pts[hi];
    return v0 + (v1 - v0) * (t - t0) / (t1 - t0);
}

} // namespace

Signal Signal::constant(double value) {
    Signal s;
    s.kind_ = Kind::Constant;
    s.value_ = value;
    return s;
}

Signal Signal::sinusoid(double amplitude, double omega, double phase) {
    Signal s;
    s.kind_ = Kind::Sinusoid;
    s.amplitude_ = amplitude;
    s.omega_ = omega;
    s.phase_ = phase;
    return s;
}

Signal Signal::piecewise_linear(std::vector<std::pair<double, double>> points) {
    check_points(points, "piecewise_linear");
    Signal s;
    s.kind_ = Kind::PiecewiseLinear;
    s.points_ = std::move(points);
    return s;
}

Signal Signal::state_sign(std::size_t index) {
    if (index < 1) throw DomainError("state_sign: index is 1-based");
    Signal s;
    s.kind_ = Kind::StateSign;
    s.index_ = index;
    return s;
}

Signal Signal::table(std::vector<std::pair<double, double>> points) {
    check_points(points, "table");
    Signal s;
    s.kind_ = Kind::Table;
    s.points_ = std::move(points);
    return s;
}

double Signal::eval(double t, std::span<const double> state) const {
    switch (kind_) {
        case Kind::Zero:
            return 0.0;
        case Kind::Constant:
            return value_;
        case Kind::Sinusoid:
            return amplitude_ * std::sin(omega_ * t + phase_);
        case Kind::PiecewiseLinear:
        case Kind::Table:
            return interp(points_, t);
        case Kind::StateSign: {
            if (index_ > state.size())
                throw DimensionError("state_sign: state component out of range");
            const double v = state[index_ - 1];
            return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0);
        }
    }
    return 0.0;
}

} // namespace delayfb::simcore
