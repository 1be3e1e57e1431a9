#pragma once

#include <stdexcept>
#include <string>

namespace sinc {

// Bad caller-supplied data: shapes, lengths, non-finite values.
class InvalidInput : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A frequency band that is inconsistent with the spectral grid.
class InvalidBand : public InvalidInput {
 public:
  using InvalidInput::InvalidInput;
};

// Invalid configuration (model shapes, generator settings, config files).
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Non-finite values produced during optimization.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Objects used out of order, e.g. a cache from a different forward pass.
class InvalidState : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Filesystem and format failures; messages carry the offending path.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace sinc
