#pragma once

#include <stdexcept>
#include <string>

namespace tvarnet {

// Invalid arguments, malformed configuration, or malformed input data.
class ArgumentError : public std::invalid_argument {
 public:
  explicit ArgumentError(const std::string& what) : std::invalid_argument(what) {}
};

// Numerical failure inside a solver or simulation (non-finite iterates,
// factorization breakdown, diverging recursion).
class NumericError : public std::runtime_error {
 public:
  explicit NumericError(const std::string& what) : std::runtime_error(what) {}
};

// File system and serialization failures.
class IoError : public std::runtime_error {
 public:
  explicit IoError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace tvarnet
