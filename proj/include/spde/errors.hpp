#pragma once

#include <stdexcept>
#include <string>

namespace spde {

/// Invalid user input: bad parameters, mismatched backends, malformed files.
class ConfigError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// A computation failed: non-finite values, quadrature or factorization breakdown.
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Operation undefined for the given argument (e.g. negative power of a singular operator).
class DomainError : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

} // namespace spde
