#pragma once

#include <stdexcept>
#include <string>

namespace invstab {

/// Invalid argument to a pure numeric helper (non-positive base, infeasible impedance).
class DomainError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Scenario or parameter set that cannot be resolved. Maps to CLI exit code 2.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Numerical failure (non-finite values, solver non-convergence). Maps to CLI exit code 3.
class NumericError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace invstab
