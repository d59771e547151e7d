#pragma once

#include <stdexcept>
#include <string>

namespace fform {

// Bad input: malformed files, violated preconditions, unknown ids.
class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Numerical or I/O failure while processing otherwise valid input.
class ComputationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace fform
