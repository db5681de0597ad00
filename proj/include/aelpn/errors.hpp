#pragma once

#include <stdexcept>
#include <string>

namespace aelpn {

// Process exit codes used by the CLI.
enum ExitCode : int {
  kExitOk = 0,
  kExitUsage = 1,
  kExitNumerical = 2,
  kExitIo = 3,
};

// Bad flags, incompatible shapes/variants, malformed requests.
class UsageError : public std::runtime_error {
 public:
  explicit UsageError(const std::string& what) : std::runtime_error(what) {}
};

// Non-finite losses, failed inversions, diverged solves.
class NumericalError : public std::runtime_error {
 public:
  explicit NumericalError(const std::string& what) : std::runtime_error(what) {}
};

// File format and filesystem failures.
class IoError : public std::runtime_error {
 public:
  explicit IoError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace aelpn
