#pragma once

#include <stdexcept>
#include <string>

namespace dfindex {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A guarded primitive (log, division, fractional power) was evaluated
/// outside its domain, or a point lies on the wrong side of the boundary.
class DomainError : public Error {
 public:
  using Error::Error;
};

class StepError : public Error {
 public:
  using Error::Error;
};

/// Invalid domain or run parameters.
class SpecError : public Error {
 public:
  using Error::Error;
};

class ConvergenceError : public Error {
 public:
  using Error::Error;
};

/// Finite-difference stencil straddles the medial axis of the boundary.
class TubularError : public Error {
 public:
  using Error::Error;
};

class DegenerateGradient : public Error {
 public:
  using Error::Error;
};

/// The Levi-flat sample set is empty; necessary conditions are vacuous.
class EmptySigma : public Error {
 public:
  using Error::Error;
};

class EmptyInput : public Error {
 public:
  using Error::Error;
};

}  // namespace dfindex
