#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace odyssey {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed N-Triples line or query text. `position` is a 1-based line for
// N-Triples and a 0-based byte offset for queries.
class SyntaxError : public Error {
 public:
  SyntaxError(std::size_t position, std::string reason)
      : Error("syntax error at " + std::to_string(position) + ": " + reason),
        position_(position),
        reason_(std::move(reason)) {}

  std::size_t position() const noexcept { return position_; }
  const std::string& reason() const noexcept { return reason_; }

 private:
  std::size_t position_;
  std::string reason_;
};

class InvalidBudget : public Error {
 public:
  using Error::Error;
};

class NotPresent : public Error {
 public:
  using Error::Error;
};

class HashMismatch : public Error {
 public:
  using Error::Error;
};

class UnsupportedFeature : public Error {
 public:
  explicit UnsupportedFeature(std::string construct)
      : Error("unsupported query feature: " + construct), construct_(std::move(construct)) {}
  const std::string& construct() const noexcept { return construct_; }

 private:
  std::string construct_;
};

// Raised for queries outside the optimizable fragment (variable predicates).
class FallbackRequired : public Error {
 public:
  using Error::Error;
};

class UnknownEndpoint : public Error {
 public:
  using Error::Error;
};

// Input file has the wrong shape (bad JSON document, missing keys).
class FormatError : public Error {
 public:
  using Error::Error;
};

}  // namespace odyssey
