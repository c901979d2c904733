#pragma once

#include <stdexcept>
#include <string>

namespace pcv2::cli {

// Usage-level failures (bad flags, missing files); mapped to exit code 2.
// Everything else the library throws maps to exit code 1.
class UsageError : public std::runtime_error {
 public:
  explicit UsageError(const std::string& msg) : std::runtime_error(msg) {}
};

// Entry point shared by the binary and the tests. Returns the process exit
// code: 0 ok, 1 internal error, 2 usage error.
int run(int argc, const char* const* argv);

}  // namespace pcv2::cli
