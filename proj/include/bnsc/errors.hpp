#pragma once

#include <stdexcept>
#include <string>

namespace bnsc {

// Malformed or inconsistent input (files, shapes, parameters). CLI exit code 1.
class InvalidInput : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A computation whose cost bound is exceeded. CLI exit code 2.
class Infeasible : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Numerical breakdown: infinite divergence, all-zero weights, etc. CLI exit code 3.
class NumericalFailure : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace bnsc
