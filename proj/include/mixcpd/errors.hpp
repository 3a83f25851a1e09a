#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace mixcpd {

class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Input vector length does not match the configured stream count.
class DimensionError : public Error {
public:
  using Error::Error;
};

/// A change-point candidate k is not addressable in the current window.
class WindowError : public Error {
public:
  using Error::Error;
};

class ParameterError : public Error {
public:
  using Error::Error;
};

/// Argument outside the mathematical domain of a function (x <= 0 for nu, theta >= 1 for square-growth scores).
class DomainError : public Error {
public:
  using Error::Error;
};

class CalibrationError : public Error {
public:
  using Error::Error;
};

class ConvergenceError : public Error {
public:
  using Error::Error;
};

/// Monte Carlo plan cannot produce an estimate (horizon too short, excessive censoring).
class SimulationError : public Error {
public:
  using Error::Error;
};

class ParseError : public Error {
public:
  ParseError(const std::string &what, std::size_t row, std::size_t column)
      : Error(what + " (row " + std::to_string(row) + ", column " + std::to_string(column) + ")"),
        row_(row), column_(column) {}

  std::size_t row() const noexcept { return row_; }
  std::size_t column() const noexcept { return column_; }

private:
  std::size_t row_;
  std::size_t column_;
};

} // namespace mixcpd
