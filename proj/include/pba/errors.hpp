#pragma once

#include <stdexcept>
#include <string>

namespace pba {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A plane passes through (or numerically at) the origin of the frame it is
/// expressed in, so its closest-point encoding is undefined.
class DegeneratePlane : public Error {
 public:
  using Error::Error;
};

/// Points are coincident or collinear; no unique plane fits them.
class DegenerateFit : public Error {
 public:
  using Error::Error;
};

/// The Schur-reduced pose system is not positive definite at the given damping.
class SingularSystem : public Error {
 public:
  using Error::Error;
};

/// The objective became non-finite during optimization.
class DivergedNaN : public Error {
 public:
  using Error::Error;
};

/// A generated scene leaves some pose without three planes spanning R^3.
class InfeasibleScene : public Error {
 public:
  using Error::Error;
};

class LengthMismatch : public Error {
 public:
  using Error::Error;
};

/// Structural problem with a graph or file (bad index, duplicate pair, ...).
class InvalidInput : public Error {
 public:
  using Error::Error;
};

}  // namespace pba
