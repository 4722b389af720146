// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>

namespace mgrr {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Incompatible extents between operands.
class DimensionError : public Error {
 public:
  using Error::Error;
};

// Precondition on call order or value domain violated (e.g. backward twice).
class ContractError : public Error {
 public:
  using Error::Error;
};

// Bad user-supplied data (empty label set, non-positive distances, ...).
class InputError : public Error {
 public:
  using Error::Error;
};

// Malformed file contents. Carries the 1-based line when known.
class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t line = 0)
      : Error(line ? what + " (line " + std::to_string(line) + ")" : what), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

class SpecError : public Error {
 public:
  using Error::Error;
};

class ManifestError : public Error {
 public:
  using Error::Error;
};

class DivergenceError : public Error {
 public:
  using Error::Error;
};

}  // namespace mgrr
