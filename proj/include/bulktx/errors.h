#pragma once

#include <stdexcept>
#include <string>

namespace bulktx {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Bad table/column/row coordinates.
struct AddressingError : Error {
  using Error::Error;
};

// Row is past row_count (for example still pending in an insert buffer) or
// has been deleted.
struct RowNotFound : AddressingError {
  using AddressingError::AddressingError;
};

struct MergeError : Error {
  MergeError(const std::string& what, long long key) : Error(what), key(key) {}
  long long key;
};

struct RegistryError : Error {
  using Error::Error;
};

// A bulk was handed to a strategy that cannot run it (e.g. a cross-partition
// transaction reaching PART).
struct SchedulingError : Error {
  using Error::Error;
};

// A procedure touched something outside its declared footprint.
struct FootprintViolation : Error {
  using Error::Error;
};

struct RecoveryError : Error {
  using Error::Error;
};

struct ParseError : Error {
  using Error::Error;
};

struct WatchdogTimeout : Error {
  using Error::Error;
};

}  // namespace bulktx
