#pragma once

#include <stdexcept>
#include <string>

namespace klda {

// Violated precondition or shape contract on a public operation.
struct ContractViolation : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// Non-finite value produced during numeric evaluation; the message names
// the operation that produced it.
struct NumericError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Malformed or corrupt external data (bad magic, truncation, checksum).
struct DataError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

inline void require(bool cond, const std::string& msg) {
  if (!cond) throw ContractViolation(msg);
}

}  // namespace klda
