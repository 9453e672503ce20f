#pragma once

#include <stdexcept>
#include <string>

namespace pgdfl {

/// Invalid shapes, tags or hyperparameters.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Out-of-range inputs to an otherwise well-configured operation.
class ValidationError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Non-finite values: a diverged run or a broken gradient.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class IllConditionedError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// An inner iterative solver stopped before meeting its tolerance.
class SolverError : public std::runtime_error {
 public:
  SolverError(const std::string& what, double residual)
      : std::runtime_error(what + " (residual " + std::to_string(residual) + ")"),
        residual_(residual) {}
  double residual() const noexcept { return residual_; }

 private:
  double residual_;
};

/// Malformed CSV content. Carries the 1-based line and the column name.
class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& what, std::size_t line, std::string column)
      : std::runtime_error(what + " at line " + std::to_string(line) +
                           (column.empty() ? "" : ", column '" + column + "'")),
        line_(line),
        column_(std::move(column)) {}
  std::size_t line() const noexcept { return line_; }
  const std::string& column() const noexcept { return column_; }

 private:
  std::size_t line_;
  std::string column_;
};

/// CSV header or dimensions disagree with the documented schema.
class SchemaError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace pgdfl

namespace pgdfl {

/// A data file parsed cleanly but held no instances.
class EmptyDatasetError : public SchemaError {
 public:
  using SchemaError::SchemaError;
};

}  // namespace pgdfl
