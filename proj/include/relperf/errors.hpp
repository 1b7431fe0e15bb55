#pragma once

#include <stdexcept>
#include <string>

namespace relperf {

// Invalid user-supplied data: bad coefficients, malformed configs, out-of-range
// arguments. CLI maps this to exit code 2.
struct ConfigError : std::runtime_error {
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

// Structurally valid request that this build does not support (e.g. a
// projection onto a set/scale pair with no implemented formula).
struct CapabilityError : std::runtime_error {
  explicit CapabilityError(const std::string& what) : std::runtime_error(what) {}
};

// Numerical procedure failed to meet its contract (non-convergence,
// divergence, internal consistency violation). CLI maps this to exit code 1.
struct SolverError : std::runtime_error {
  explicit SolverError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace relperf
