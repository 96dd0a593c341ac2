#pragma once

#include <stdexcept>
#include <string>

namespace dfgs {

// Error taxonomy maps straight onto CLI exit codes:
//   UsageError -> 1, DataError -> 2, NumericError -> 3.
struct Error : std::runtime_error {
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

struct UsageError : Error {
  using Error::Error;
};

// Malformed inputs: bad shapes, bad files, corrupt or mismatched bitstreams.
struct DataError : Error {
  using Error::Error;
};

// Non-finite losses, diverged training, numeric guard failures.
struct NumericError : Error {
  using Error::Error;
};

}  // namespace dfgs
