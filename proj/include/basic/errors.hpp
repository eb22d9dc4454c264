#pragma once

#include <stdexcept>
#include <string>

namespace basic {

// Invalid arguments or configuration (bad hyperparameters, unnormalized
// weights, shape mismatches).
class ValidationError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Malformed or out-of-support input data. Carries the offending position
// when known (1-based in messages, -1 when not applicable).
class DataError : public std::runtime_error {
 public:
  explicit DataError(const std::string& what, long row = -1, long column = -1)
      : std::runtime_error(what), row_(row), column_(column) {}
  long row() const noexcept { return row_; }
  long column() const noexcept { return column_; }

 private:
  long row_;
  long column_;
};

// Command-line misuse (unknown flags, invalid flag combinations).
class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace basic
