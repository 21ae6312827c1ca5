#ifndef HARMONIC_ERRORS_HPP
#define HARMONIC_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace harmonic {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A state outside the representable range of a kernel or table.
class RangeError : public Error {
 public:
  using Error::Error;
};

/// A function is missing a value the computation needs.
class DomainError : public Error {
 public:
  using Error::Error;
};

/// A kernel row with zero total mass where positive mass is required.
class DegenerateRowError : public Error {
 public:
  DegenerateRowError(int state, const std::string& what)
      : Error(what + " (state " + std::to_string(state) + ")"), state_(state) {}
  int state() const noexcept { return state_; }

 private:
  int state_;
};

/// Malformed input: negative weights, pmfs not summing to one, bad parameters.
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

/// Input outside what the algorithm supports (e.g. infinite perturbation support).
class UnsupportedInput : public Error {
 public:
  using Error::Error;
};

/// Linear solve or iteration failed; carries a reason and a numeric diagnostic.
class SolverFailure : public Error {
 public:
  enum class Reason { singular, negative_solution, doubling_mismatch, not_converged };

  SolverFailure(Reason reason, double diagnostic, const std::string& what)
      : Error(what), reason_(reason), diagnostic_(diagnostic) {}
  Reason reason() const noexcept { return reason_; }
  double diagnostic() const noexcept { return diagnostic_; }

 private:
  Reason reason_;
  double diagnostic_;
};

/// Iterative computation did not reach its tolerance within the iteration cap.
class ConvergenceError : public Error {
 public:
  ConvergenceError(double residual, const std::string& what) : Error(what), residual_(residual) {}
  double residual() const noexcept { return residual_; }

 private:
  double residual_;
};

/// No positive harmonic function exists for the given parameters.
class NoPositiveHarmonicFunction : public Error {
 public:
  using Error::Error;
};

/// A jump law with no positive Cramér root.
class NoCramerRoot : public Error {
 public:
  using Error::Error;
};

/// Two routes to the same quantity disagree beyond tolerance.
class ConsistencyError : public Error {
 public:
  using Error::Error;
};

/// A function fails the harmonicity check required by a transform.
class NotHarmonicError : public Error {
 public:
  NotHarmonicError(double residual, const std::string& what) : Error(what), residual_(residual) {}
  double residual() const noexcept { return residual_; }

 private:
  double residual_;
};

}  // namespace harmonic

#endif  // HARMONIC_ERRORS_HPP
