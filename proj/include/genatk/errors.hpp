#pragma once

#include <stdexcept>
#include <string>

namespace genatk {

// Every library failure derives from Error. The CLI maps the three families
// below onto stable exit codes (usage 2, data 3, numeric/contract 4).
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class UsageError : public Error {
 public:
  using Error::Error;
};

// An invalid configuration value (learning rate, mask rate, fractions...).
class ConfigError : public UsageError {
 public:
  using UsageError::UsageError;
};

class DataError : public Error {
 public:
  using Error::Error;
};

class ContractError : public Error {
 public:
  using Error::Error;
};

// Tensor shapes disagree for an operation.
class DimensionError : public ContractError {
 public:
  using ContractError::ContractError;
};

// A non-finite value escaped an operation.
class NumericError : public ContractError {
 public:
  using ContractError::ContractError;
};

class VocabError : public DataError {
 public:
  using DataError::DataError;
};

class MetricUndefinedError : public DataError {
 public:
  using DataError::DataError;
};

class StratificationError : public DataError {
 public:
  using DataError::DataError;
};

class FileMissingError : public DataError {
 public:
  using DataError::DataError;
};

class FormatError : public DataError {
 public:
  using DataError::DataError;
};

class EmptyDataError : public DataError {
 public:
  using DataError::DataError;
};

}  // namespace genatk
