#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace lrw {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvalidSiteError : public Error {
 public:
  using Error::Error;
};

class BudgetExceededError : public Error {
 public:
  using Error::Error;
};

class PreconditionError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class BuildError : public Error {
 public:
  using Error::Error;
};

class CertificationError : public Error {
 public:
  using Error::Error;
};

class ConvergenceError : public Error {
 public:
  ConvergenceError(const std::string& what, double last_iterate, double residual)
      : Error(what), last_iterate_(last_iterate), residual_(residual) {}
  double last_iterate() const noexcept { return last_iterate_; }
  double residual() const noexcept { return residual_; }

 private:
  double last_iterate_;
  double residual_;
};

class LeakBudgetError : public Error {
 public:
  LeakBudgetError(const std::string& what, std::size_t n_reached)
      : Error(what), n_reached_(n_reached) {}
  std::size_t n_reached() const noexcept { return n_reached_; }

 private:
  std::size_t n_reached_;
};

class InsufficientDepthError : public Error {
 public:
  InsufficientDepthError(const std::string& what, std::size_t required)
      : Error(what), required_(required) {}
  std::size_t required() const noexcept { return required_; }

 private:
  std::size_t required_;
};

class WindowTooSmallError : public Error {
 public:
  using Error::Error;
};

class CensoredPathsError : public Error {
 public:
  using Error::Error;
};

class NoFeasibleGammaError : public Error {
 public:
  using Error::Error;
};

class EmptyScanError : public Error {
 public:
  using Error::Error;
};

class ZeroMinimumError : public Error {
 public:
  using Error::Error;
};

class MissingDependencyError : public Error {
 public:
  using Error::Error;
};

}  // namespace lrw
