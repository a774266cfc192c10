#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace quasiphase {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

class InvalidDimension : public Error {
public:
  using Error::Error;
};

class InvalidArgument : public Error {
public:
  using Error::Error;
};

/// A basis index at or above the number-basis cutoff.
class OutOfCutoff : public Error {
public:
  using Error::Error;
};

/// A state would lose more than the tail tolerance to the cutoff.
/// Carries the smallest cutoff that would have been accepted.
class TruncationError : public Error {
public:
  TruncationError(const std::string& what, std::size_t required_dim, double tail_mass)
      : Error(what), required_dim_(required_dim), tail_mass_(tail_mass) {}

  std::size_t required_dim() const noexcept { return required_dim_; }
  double tail_mass() const noexcept { return tail_mass_; }

private:
  std::size_t required_dim_;
  double tail_mass_;
};

class NonHermitian : public Error {
public:
  NonHermitian(const std::string& what, double defect) : Error(what), defect_(defect) {}
  double defect() const noexcept { return defect_; }

private:
  double defect_;
};

/// The requested P distribution is a distribution (delta derivatives), not a function.
class SingularP : public Error {
public:
  using Error::Error;
};

/// Sampled data does not decay at the grid boundary.
class GridTooSmall : public Error {
public:
  GridTooSmall(const std::string& what, double boundary_value)
      : Error(what), boundary_value_(boundary_value) {}
  double boundary_value() const noexcept { return boundary_value_; }

private:
  double boundary_value_;
};

/// A channel output lost trace to the cutoff.
class TraceLeak : public Error {
public:
  TraceLeak(const std::string& what, double deficit, std::size_t suggested_dim)
      : Error(what), deficit_(deficit), suggested_dim_(suggested_dim) {}
  double deficit() const noexcept { return deficit_; }
  std::size_t suggested_dim() const noexcept { return suggested_dim_; }

private:
  double deficit_;
  std::size_t suggested_dim_;
};

/// The ancilla (or output mode) of a dilation reached its cutoff.
class AncillaTail : public Error {
public:
  AncillaTail(const std::string& what, double tail) : Error(what), tail_(tail) {}
  double tail() const noexcept { return tail_; }

private:
  double tail_;
};

class ParseError : public Error {
public:
  ParseError(const std::string& what, std::size_t position)
      : Error(what), position_(position) {}
  std::size_t position() const noexcept { return position_; }

private:
  std::size_t position_;
};

} // namespace quasiphase
