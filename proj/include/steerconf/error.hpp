#pragma once

#include <stdexcept>
#include <string>

namespace steerconf {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Raised for invalid run configuration (bad config file, missing API key,
// unsupported steering depth) before any work is done.
class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace steerconf
