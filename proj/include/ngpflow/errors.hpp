#pragma once

#include <stdexcept>
#include <string>

namespace ngp {

/// Base class for every error raised by the library. Carries the name of the
/// module that raised it so the CLI can report provenance.
class Error : public std::runtime_error {
 public:
  Error(std::string module, const std::string& what)
      : std::runtime_error(module + ": " + what), module_(std::move(module)) {}

  const std::string& module() const noexcept { return module_; }

 private:
  std::string module_;
};

/// Singularities, failed convergence, perturbative breakdown. CLI exit code 1.
class NumericError : public Error {
 public:
  using Error::Error;
};

/// Malformed configuration, bad input files, dimension mismatches. CLI exit code 2.
class ConfigError : public Error {
 public:
  using Error::Error;
};

class SingularKernelError : public NumericError {
 public:
  SingularKernelError(std::string module, const std::string& what, double condition)
      : NumericError(std::move(module), what), condition_(condition) {}

  double condition() const noexcept { return condition_; }

 private:
  double condition_;
};

}  // namespace ngp
