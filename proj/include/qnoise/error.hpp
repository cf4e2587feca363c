#pragma once

#include <stdexcept>
#include <string>

namespace qnoise {

// Root of every error raised by the library. The CLI maps the three
// subclasses below onto distinct exit codes.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A parameter, configuration value or input record violates its invariants.
class DomainError : public Error {
 public:
  using Error::Error;
};

// A numerical evaluation could not produce a finite, meaningful value.
class NumericsError : public Error {
 public:
  using Error::Error;
};

// K^cav hit its pole; carries the offending frequency.
class SingularityError : public NumericsError {
 public:
  SingularityError(const std::string& what, double omega)
      : NumericsError(what), omega_(omega) {}
  double omega() const noexcept { return omega_; }

 private:
  double omega_;
};

class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace qnoise
