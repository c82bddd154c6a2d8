#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace advrisk {

// Base class for every error raised by the library. The CLI maps the
// concrete subclasses onto its exit-code contract.
class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

// Invalid arguments, preconditions, or configuration.
class ConfigError : public Error {
public:
  using Error::Error;
};

// Vector length mismatch between an input and a model or another vector.
class DimensionError : public ConfigError {
public:
  DimensionError(std::size_t expected, std::size_t got)
      : ConfigError("dimension mismatch: expected " + std::to_string(expected) +
                    ", got " + std::to_string(got)) {}
};

// Outcome sets that cannot be pooled because they were computed on
// different samples or under different metrics.
class SampleMismatchError : public ConfigError {
public:
  using ConfigError::ConfigError;
};

// Training divergence, fitting non-convergence, non-finite values.
class NumericError : public Error {
public:
  using Error::Error;
};

class IoError : public Error {
public:
  using Error::Error;
};

enum class FormatErrc {
  bad_header,
  version_mismatch,
  duplicate_id,
  malformed_number,
  malformed_line,
  metric_mismatch,
  hash_mismatch,
  unknown_id,
};

inline const char* to_string(FormatErrc code) {
  switch (code) {
    case FormatErrc::bad_header: return "bad header";
    case FormatErrc::version_mismatch: return "version mismatch";
    case FormatErrc::duplicate_id: return "duplicate id";
    case FormatErrc::malformed_number: return "malformed number";
    case FormatErrc::malformed_line: return "malformed line";
    case FormatErrc::metric_mismatch: return "metric mismatch";
    case FormatErrc::hash_mismatch: return "sample hash mismatch";
    case FormatErrc::unknown_id: return "unknown observation id";
  }
  return "format error";
}

// A file parsed but its content is invalid. Carries the 1-based line number
// (0 when the error concerns the file as a whole).
class FormatError : public IoError {
public:
  FormatError(FormatErrc code, std::size_t line, const std::string& detail)
      : IoError(std::string(to_string(code)) +
                (line > 0 ? " at line " + std::to_string(line) : std::string()) +
                (detail.empty() ? std::string() : ": " + detail)),
        code_(code),
        line_(line) {}

  FormatErrc code() const noexcept { return code_; }
  std::size_t line() const noexcept { return line_; }

private:
  FormatErrc code_;
  std::size_t line_;
};

}  // namespace advrisk
