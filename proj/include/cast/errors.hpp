#pragma once

#include <stdexcept>
#include <string>

namespace cast {

// Bad grid / experiment / planner parameters.
struct config_error : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

// Caller broke a documented precondition (empty input, mismatched sizes).
struct contract_violation : std::logic_error {
    using std::logic_error::logic_error;
};

// Factorization failed or the normal matrix is too ill-conditioned to trust.
struct numerical_error : std::runtime_error {
    numerical_error(const std::string& what, double condition_estimate)
        : std::runtime_error(what + " (condition estimate " + std::to_string(condition_estimate) + ")"),
          condition(condition_estimate) {}
    double condition;
};

struct planning_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

} // namespace cast
