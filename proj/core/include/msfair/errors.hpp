#pragma once

#include <stdexcept>

namespace msfair {

// Bad user input: malformed files, inconsistent dimensions, invalid instances.
class InputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// The LP solver could not produce an optimal solution.
class SolverError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A computed result broke one of the model's guaranteed relations.
class InvariantError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace msfair
