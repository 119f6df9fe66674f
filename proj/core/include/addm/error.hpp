#pragma once

#include <stdexcept>
#include <string>

namespace addm {

/// Bad input: config constraint violations, shape mismatches, out-of-range
/// timesteps. Maps to process exit code 1.
class ValidationError : public std::runtime_error {
public:
  explicit ValidationError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Filesystem / format failures. Maps to exit code 2.
class IoError : public std::runtime_error {
public:
  explicit IoError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Non-finite values detected mid-computation. Maps to exit code 3.
class NumericalError : public std::runtime_error {
public:
  explicit NumericalError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace addm
