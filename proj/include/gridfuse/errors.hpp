#pragma once

#include <stdexcept>
#include <string>

namespace gridfuse {

// Malformed or inconsistent input data (files, label values, archives).
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// An iterative solver ran out of iterations.
class ConvergenceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace gridfuse
