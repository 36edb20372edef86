#pragma once

#include <stdexcept>
#include <string>

namespace readmit {

// Base class for every error raised by the library. The CLI maps each
// subclass onto a process exit code.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed input data: schema mismatch, unparsable cell, bad label.
class DataError : public Error {
 public:
  using Error::Error;
};

// Invalid configuration. `field()` carries the dotted path of the offending
// field when one is known.
class ConfigError : public Error {
 public:
  ConfigError(std::string field, const std::string& message)
      : Error(field.empty() ? message : field + ": " + message),
        field_(std::move(field)) {}
  explicit ConfigError(const std::string& message) : ConfigError("", message) {}

  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

// A stage was asked to run before its upstream artifact exists.
class MissingArtifactError : public Error {
 public:
  explicit MissingArtifactError(std::string path)
      : Error("missing artifact: " + path), path_(std::move(path)) {}

  const std::string& path() const noexcept { return path_; }

 private:
  std::string path_;
};

// Singular systems, divergence, or other numerical breakdown.
class NumericError : public Error {
 public:
  using Error::Error;
};

}  // namespace readmit
