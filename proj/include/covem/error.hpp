#pragma once

#include <stdexcept>
#include <string>

namespace covem {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Mesh or problem data breaks an invariant.
class ValidationError : public Error {
 public:
  using Error::Error;
};

/// A single element cannot be formulated (degenerate geometry, singular G).
class ElementError : public Error {
 public:
  ElementError(int element, const std::string& what)
      : Error("element " + std::to_string(element) + ": " + what), element_(element) {}
  int element() const noexcept { return element_; }

 private:
  int element_;
};

/// Local return-map iteration failed to converge.
class ConstitutiveError : public Error {
 public:
  using Error::Error;
};

/// Co-rotational frame cannot be recovered (collapsed element).
class KinematicError : public Error {
 public:
  using Error::Error;
};

/// Path following terminated: step cuts exhausted or linear solve failed.
class PathError : public Error {
 public:
  using Error::Error;
};

/// Run configuration or CLI arguments are invalid.
class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace covem
