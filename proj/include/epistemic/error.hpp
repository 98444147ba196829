#pragma once

#include <stdexcept>
#include <string>

namespace epistemic {

// Domain failure raised by any module. The message is the user-facing
// diagnostic; the CLI maps it to exit code 1.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed scenario input (exit code 2).
class SchemaError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace epistemic
