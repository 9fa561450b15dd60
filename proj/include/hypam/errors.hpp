#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace hypam {

// Bad arguments are reported with std::invalid_argument throughout.

/// A point or quantity fell outside the domain of a formula (e.g. -a*b < 1).
class numeric_domain_error : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Root bracketing / ODE / eigensolver failures.
class solver_error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Rejection sampler ran out of tries.
class sampler_failure : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Monte Carlo estimator could not produce a trustworthy value.
class estimator_error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Experiment configuration problem, tagged with the offending line (0 = none).
class config_error : public std::runtime_error {
 public:
  config_error(std::size_t line, const std::string& what)
      : std::runtime_error(line == 0 ? what : "line " + std::to_string(line) + ": " + what),
        line_(line) {}

  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

}  // namespace hypam
