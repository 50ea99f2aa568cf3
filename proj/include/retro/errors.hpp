#pragma once

#include <stdexcept>
#include <string>

namespace retro {

/// Malformed or inconsistent input: dimension mismatch, non-unitary matrix,
/// non-CPTP map, out-of-range index.
class InvalidInput : public std::invalid_argument {
public:
  using std::invalid_argument::invalid_argument;
};

/// Conditioning on an outcome of zero probability.
class UndefinedConditional : public std::domain_error {
public:
  using std::domain_error::domain_error;
};

/// The adjoint of a channel is not trace non-increasing, so there is no
/// operational time-reversed channel.
class NoActiveReverse : public std::domain_error {
public:
  using std::domain_error::domain_error;
};

/// A document that is not well-formed for the expected schema. The message
/// starts with the offending field path.
class ParseError : public std::runtime_error {
public:
  ParseError(const std::string& field, const std::string& what)
      : std::runtime_error(field + ": " + what), field_(field) {}
  const std::string& field() const noexcept { return field_; }

private:
  std::string field_;
};

} // namespace retro
