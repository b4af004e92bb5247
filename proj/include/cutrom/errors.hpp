#pragma once

#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace cutrom {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class AnchorOnInterface : public Error { using Error::Error; };
class DegenerateRect : public Error { using Error::Error; };
class NotCut : public Error { using Error::Error; };
class SolidElement : public Error { using Error::Error; };
class IncompatibleLifting : public Error { using Error::Error; };
class InactiveState : public Error { using Error::Error; };
class LinearSolverFailure : public Error { using Error::Error; };
class RankDeficient : public Error { using Error::Error; };
class ShapeMismatch : public Error { using Error::Error; };
class MissingSnapshot : public Error { using Error::Error; };
class ZeroReference : public Error { using Error::Error; };
class IoError : public Error { using Error::Error; };
class ValidationError : public Error { using Error::Error; };

class ParseError : public Error {
 public:
  ParseError(const std::string& what, long line) : Error(what), line_(line) {}
  long line() const { return line_; }

 private:
  long line_;
};

/// Newton failed to reach tolerance. Carries the residual history; the caller
/// that owns the iterate may attach it separately.
class NewtonDiverged : public Error {
 public:
  NewtonDiverged(const std::string& what, std::vector<double> history, int step = -1)
      : Error(what), history_(std::move(history)), step_(step) {}
  const std::vector<double>& history() const { return history_; }
  /// Time step index for unsteady solves, -1 for steady.
  int step() const { return step_; }

 private:
  std::vector<double> history_;
  int step_;
};

}  // namespace cutrom
