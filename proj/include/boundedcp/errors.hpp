#pragma once

#include <stdexcept>
#include <string>

namespace boundedcp {

// Base class for all library errors so callers can catch one type.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

// Parameter or argument outside the model's admissible domain.
class OutOfDomain : public Error {
 public:
  explicit OutOfDomain(const std::string& what) : Error(what) {}
};

// Series (or sub-series) carries no information for the requested estimator,
// e.g. a constant lagged regressor making the least-squares system singular.
class DegenerateSeries : public Error {
 public:
  explicit DegenerateSeries(const std::string& what) : Error(what) {}
};

// Conditional variance evaluated non-positive; quasi-likelihood weights
// are undefined.
class NonpositiveVariance : public Error {
 public:
  explicit NonpositiveVariance(const std::string& what) : Error(what) {}
};

// A matrix that must be inverted is numerically singular.
class SingularMatrix : public Error {
 public:
  explicit SingularMatrix(const std::string& what) : Error(what) {}
};

// Requested significance level has no tabulated critical value.
class UnsupportedLevel : public Error {
 public:
  explicit UnsupportedLevel(const std::string& what) : Error(what) {}
};

// No candidate segmentation satisfies the spacing constraints.
class Infeasible : public Error {
 public:
  explicit Infeasible(const std::string& what) : Error(what) {}
};

// A set-distance was requested on an empty set.
class EmptySet : public Error {
 public:
  explicit EmptySet(const std::string& what) : Error(what) {}
};

// Malformed input file; carries the 1-based line number of the offence
// (0 when the problem is not tied to a line, e.g. an unreadable file).
class ParseError : public Error {
 public:
  ParseError(int line, const std::string& what)
      : Error(line > 0 ? "line " + std::to_string(line) + ": " + what : what),
        line_(line) {}
  int line() const { return line_; }

 private:
  int line_;
};

}  // namespace boundedcp
