#pragma once

#include <stdexcept>
#include <string>

namespace mhgan {

/// Contract violation by the caller (bad shape, bad parameter, bad config).
class InvalidArgument : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Failure discovered while running (non-finite loss, exhausted budgets).
class RuntimeError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace mhgan
