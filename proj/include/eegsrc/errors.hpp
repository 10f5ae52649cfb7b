#pragma once

#include <stdexcept>
#include <string>

namespace eegsrc {

// Bad input files: missing epochs, wrong line counts, unparsable samples,
// checksum mismatches. Maps to CLI exit code 1.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Invalid parameters or inconsistent shapes passed to an operation.
class ArgumentError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Non-finite values or a breakdown that the numerics cannot recover from.
// Maps to CLI exit code 2.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace eegsrc
