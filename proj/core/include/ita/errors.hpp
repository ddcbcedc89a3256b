#pragma once

#include <stdexcept>
#include <string>

namespace ita {

// Malformed input data (corpus lines, JSON records, checkpoints).
class DataError : public std::runtime_error {
 public:
  explicit DataError(const std::string& what) : std::runtime_error(what) {}
};

// Invalid configuration or usage (bad flag values, missing paths).
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

// Non-finite losses or other numerical breakdown during training.
class NumericError : public std::runtime_error {
 public:
  explicit NumericError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace ita
