#pragma once

#include <stdexcept>
#include <string>

namespace aquinv {

// Error categories map 1:1 onto the CLI exit codes:
//   config_error -> 2, numeric_error -> 3, io_error -> 4.
// Precondition violations (bad arguments, out-of-domain points) use the
// standard std::invalid_argument / std::domain_error and also exit with 2.

struct config_error : std::runtime_error {
  explicit config_error(const std::string& msg) : std::runtime_error(msg) {}
};

struct numeric_error : std::runtime_error {
  explicit numeric_error(const std::string& msg) : std::runtime_error(msg) {}
};

struct io_error : std::runtime_error {
  explicit io_error(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace aquinv
