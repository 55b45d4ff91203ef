#pragma once

#include <stdexcept>
#include <string>

namespace convsolve {

// Base of every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed inputs: wrong list lengths, bad parameters, unreadable tables.
class StructuralError : public Error {
 public:
  using Error::Error;
};

// Evaluation outside a function's domain (e.g. a weight at its singular point).
class DomainError : public Error {
 public:
  using Error::Error;
};

// Quadrature estimate that does not settle (non-integrable tail, etc.).
class QuadratureError : public Error {
 public:
  using Error::Error;
};

// Power iteration / radius / Perron vector failures.
class SpectralError : public Error {
 public:
  using Error::Error;
};

// Majorant system or contraction parameter failures.
class MajorantError : public Error {
 public:
  using Error::Error;
};

// Plan construction or iteration failures. Carries the offending location
// when one exists.
class SolveError : public Error {
 public:
  SolveError(const std::string& what, int component = -1, int node = -1, int step = -1)
      : Error(what), component_(component), node_(node), step_(step) {}

  int component() const noexcept { return component_; }
  int node() const noexcept { return node_; }
  int step() const noexcept { return step_; }

 private:
  int component_;
  int node_;
  int step_;
};

}  // namespace convsolve
