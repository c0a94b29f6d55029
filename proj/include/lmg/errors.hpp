#pragma once

#include <stdexcept>
#include <string>

namespace lmg {

// Bad user input: parameter out of range, malformed config, unknown key.
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

// Numerical failure inside a solver (non-finite state, unstable step size).
class SolverError : public std::runtime_error {
 public:
  explicit SolverError(const std::string& what) : std::runtime_error(what) {}
};

// A run completed but cannot support the requested estimate, e.g. too many
// unabsorbed trajectories for a stationary p_plus. Carries the fraction.
class InconclusiveError : public std::runtime_error {
 public:
  InconclusiveError(const std::string& what, double unabsorbed_fraction)
      : std::runtime_error(what), unabsorbed_fraction(unabsorbed_fraction) {}
  double unabsorbed_fraction;
};

}  // namespace lmg
