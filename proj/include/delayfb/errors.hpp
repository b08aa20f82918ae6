#pragma once

#include <stdexcept>
#include <string>

namespace delayfb {

/// Matrix/vector shape does not match the operation's contract.
struct DimensionError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

/// Scalar parameter outside its admissible interval (e.g. step h not in (0,1]).
struct DomainError : std::domain_error {
    using std::domain_error::domain_error;
};

/// Elimination met a pivot below tolerance.
struct SingularMatrixError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// An iterative scheme failed to converge within its iteration cap.
struct NumericalFailure : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// The vertex Lyapunov inequality failed; message names the violating vertex.
struct NotStabilizingError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Candidate Lyapunov matrix is not symmetric positive definite.
struct InvalidLyapunovError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// No admissible step exists above the search floor.
struct InfeasibleStepError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Scaling factor r does not exceed R(b); carries the required threshold.
struct ScalingTooSmallError : std::runtime_error {
    ScalingTooSmallError(const std::string& what, double rb)
        : std::runtime_error(what), required_threshold(rb) {}
    double required_threshold;
};

/// Integration step does not divide the delay step.
struct GridMismatchError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

/// A runtime contract was violated during simulation (e.g. sector bound).
struct ContractViolation : std::logic_error {
    using std::logic_error::logic_error;
};

/// Bisection bracket endpoints do not classify as (stable, unstable).
struct BadBracketError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

/// Mismatched configuration between artifacts (e.g. trajectory h vs certificate h).
struct ConfigError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

} // namespace delayfb
