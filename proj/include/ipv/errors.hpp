#pragma once

#include <stdexcept>
#include <string>

namespace ipv {

/// Invalid or infeasible configuration (bad covariate spec, J x min_panel > n, ...).
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A quantity that is mathematically undefined for the given input, e.g. the
/// ground-truth discordance of a panel with fewer than two eligible patients.
class UndefinedError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// A learner could not be fitted (single-class outcome, diverging optimizer).
class FitError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace ipv
