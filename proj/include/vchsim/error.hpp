#pragma once

#include <stdexcept>
#include <string>

namespace vch {

/// Configuration or data rejected before any stepping. `hypothesis` names the
/// violated modelling assumption (e.g. "hpzero"), empty for syntax errors.
class ConfigError : public std::runtime_error {
 public:
  ConfigError(const std::string& what, std::string hypothesis = {}, int line = 0)
      : std::runtime_error(what), hypothesis_(std::move(hypothesis)), line_(line) {}
  const std::string& hypothesis() const { return hypothesis_; }
  int line() const { return line_; }

 private:
  std::string hypothesis_;
  int line_;
};

/// A nonlinear or linear solve failed to reach its tolerance.
class SolverError : public std::runtime_error {
 public:
  SolverError(const std::string& what, double residual, int iterations)
      : std::runtime_error(what), residual_(residual), iterations_(iterations) {}
  double residual() const { return residual_; }
  int iterations() const { return iterations_; }

 private:
  double residual_;
  int iterations_;
};

}  // namespace vch
