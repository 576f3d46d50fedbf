#pragma once

#include <stdexcept>
#include <string>

namespace eit {

// Invalid input: malformed files, inconsistent dimensions, bad configuration.
class InputError : public std::runtime_error {
 public:
  explicit InputError(const std::string& what) : std::runtime_error(what) {}
};

// Numerical breakdown: failed factorizations, disconnected electrodes.
class NumericalError : public std::runtime_error {
 public:
  explicit NumericalError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace eit
