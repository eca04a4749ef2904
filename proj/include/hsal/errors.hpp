#pragma once

#include <stdexcept>
#include <string>

namespace hsal {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Shape mismatch between operands.
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// Caller violated a documented precondition.
class ContractError : public Error {
 public:
  using Error::Error;
};

/// NaN/Inf where finite values are required.
class NumericError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Malformed input files, duplicate interactions, inconsistent series catalogs.
class DataError : public Error {
 public:
  using Error::Error;
};

/// Unknown node or id.
class LookupError : public DataError {
 public:
  using DataError::DataError;
};

}  // namespace hsal
