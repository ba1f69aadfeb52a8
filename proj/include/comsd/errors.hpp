#pragma once

#include <stdexcept>
#include <string>

namespace comsd {

// dimension mismatch between a tensor and what an operation expects
class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// a NaN/Inf showed up in a loss, gradient or reward
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// invalid configuration field; `field` names the offending key
class ConfigError : public std::invalid_argument {
 public:
  ConfigError(std::string field, const std::string& message)
      : std::invalid_argument(field + ": " + message), field_(std::move(field)) {}
  const std::string& field() const { return field_; }

 private:
  std::string field_;
};

// checkpoint missing, truncated, or incompatible
class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// not enough data in the replay store to sample the requested batch
class InsufficientDataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace comsd
