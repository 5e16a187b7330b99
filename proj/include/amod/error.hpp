#pragma once

#include <stdexcept>
#include <string>

namespace amod {

// Malformed or out-of-contract input (bad files, invalid graphs, bad flags).
class InputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A solver could not produce a trustworthy answer.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace amod
