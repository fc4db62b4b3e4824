#pragma once

#include <stdexcept>
#include <string>

namespace trge {

// Precondition violation on a public operation (dimension mismatch, out of
// range count, unknown id, ...).
class InvalidArgument : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// A gradient or optimizer update reached a frozen expert group.
class FrozenViolation : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

// Training produced a non-finite loss or gradient.
class NumericalFailure : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Benchmark generation could not satisfy its quality checks within the
// retry budget.
class GenerationInfeasible : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed, unsupported or tampered run artifact.
class ArtifactError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Bad configuration value; `key` names the offending field.
class ConfigError : public std::runtime_error {
 public:
  ConfigError(std::string key, const std::string& message)
      : std::runtime_error(key + ": " + message), key_(std::move(key)) {}
  const std::string& key() const noexcept { return key_; }

 private:
  std::string key_;
};

}  // namespace trge
