#pragma once

#include <stdexcept>
#include <string>

namespace jamlab {

/// Precondition broken by the caller (wrong dimension, unsorted input, ...).
class ContractViolation : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// User-supplied data rejected by validation (bad solid spec, inadmissible eta, ...).
class ValidationError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Valid input that the implementation does not support (e.g. eps = 0 with d >= 2).
class UnsupportedConfiguration : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A run could not complete as requested (horizon too small, certification failed, ...).
class RunFailure : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline void require(bool ok, const std::string& what) {
  if (!ok) throw ContractViolation(what);
}

}  // namespace jamlab
