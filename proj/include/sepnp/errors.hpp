#pragma once

#include <stdexcept>
#include <string>

namespace sepnp {

// Base of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A state violates the simplex constraint sum(u_i) + u_O <= 1.
class InfeasibleStateError : public Error {
 public:
  using Error::Error;
};

// Argument outside the domain of a function (logarithm of zero, x outside [0,1], ...).
class DomainError : public Error {
 public:
  using Error::Error;
};

// Mismatched sizes between grids, vectors or matrices.
class DimensionError : public Error {
 public:
  using Error::Error;
};

// Invalid or incomplete configuration. `key()` names the offending key path.
class ConfigError : public Error {
 public:
  ConfigError(std::string key, const std::string& what)
      : Error(key.empty() ? what : key + ": " + what), key_(std::move(key)) {}
  const std::string& key() const noexcept { return key_; }

 private:
  std::string key_;
};

// Newton iteration failed to reach the residual tolerance.
class NewtonFailure : public Error {
 public:
  NewtonFailure(const std::string& what, int iterations, double residual)
      : Error(what), iterations_(iterations), residual_(residual) {}
  int iterations() const noexcept { return iterations_; }
  double residual() const noexcept { return residual_; }

 private:
  int iterations_;
  double residual_;
};

// The linear system is numerically singular.
class LinearSolveError : public Error {
 public:
  using Error::Error;
};

// Bad solver parameters (e.g. too few time steps for a convergence study).
class ParameterError : public Error {
 public:
  using Error::Error;
};

// Fitting a decay rate on data that is not strictly positive, or mismatched fits.
class FitError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  IoError(const std::string& path, const std::string& what) : Error(path + ": " + what), path_(path) {}
  const std::string& path() const noexcept { return path_; }

 private:
  std::string path_;
};

}  // namespace sepnp
