#pragma once

#include <stdexcept>
#include <string>

namespace wagepanel {

/// Raised for malformed inputs or violated preconditions. `kind()` is a short
/// machine-readable tag (e.g. "missing-column", "duplicate-key") that the CLI
/// prints as `error: <kind>: <detail>`.
class ValidationError : public std::runtime_error {
public:
  ValidationError(std::string kind, const std::string &detail)
      : std::runtime_error(detail), kind_(std::move(kind)) {}

  const std::string &kind() const noexcept { return kind_; }

private:
  std::string kind_;
};

/// Raised when an iterative solver exhausts its iteration budget.
class ConvergenceError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

} // namespace wagepanel
