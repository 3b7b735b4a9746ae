#pragma once

#include <stdexcept>
#include <string>

namespace bfrog {

/// Invalid parameters or configuration (bad dimension, non-finite value, ...).
class ConfigError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// An operation was called with inputs that violate its precondition.
class PreconditionError : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

/// A numerical procedure failed to converge or produced a degenerate result.
class ComputationError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace bfrog
