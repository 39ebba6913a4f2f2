#pragma once

#include <stdexcept>
#include <string>

namespace pfsddp {

/// Root of every exception thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ParseError : public Error {
 public:
  using Error::Error;
};

class DimensionMismatch : public Error {
 public:
  using Error::Error;
};

class IndexError : public Error {
 public:
  using Error::Error;
};

/// Simplex failure that is not a classification (iteration cap, singular basis).
class NumericalFailure : public Error {
 public:
  using Error::Error;
};

class TreeTooLarge : public Error {
 public:
  using Error::Error;
};

class MixedKind : public Error {
 public:
  using Error::Error;
};

class TopologyError : public Error {
 public:
  using Error::Error;
};

/// A validation failure, with the stage/row locus of the first offending item.
class ValidationError : public Error {
 public:
  ValidationError(int stage, int row, const std::string& what)
      : Error(what), stage_(stage), row_(row) {}
  int stage() const { return stage_; }
  int row() const { return row_; }

 private:
  int stage_;
  int row_;
};

/// The non-relaxable rows of a stage admit no solution, independent of how
/// much slack the relaxable rows are given. Stage and realization are 0-based.
class StructuralInfeasibility : public Error {
 public:
  StructuralInfeasibility(int stage, int realization, int row_hint, const std::string& what)
      : Error(what), stage_(stage), realization_(realization), row_hint_(row_hint) {}
  int stage() const { return stage_; }
  int realization() const { return realization_; }
  int row_hint() const { return row_hint_; }

 private:
  int stage_;
  int realization_;
  int row_hint_;
};

/// A subproblem that is feasible by construction came back infeasible.
class DefensiveInfeasible : public Error {
 public:
  using Error::Error;
};

}  // namespace pfsddp
