#pragma once

#include <stdexcept>
#include <string>

namespace dcpkit {

/// Process exit codes reported by the command-line front end.
enum class ErrorCode : int {
  config = 2,
  input = 3,
  numeric = 4,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, std::string kind, const std::string& what)
      : std::runtime_error(what), code_(code), kind_(std::move(kind)) {}

  ErrorCode code() const noexcept { return code_; }
  /// Short machine-readable tag, e.g. "format" or "dimension".
  const std::string& kind() const noexcept { return kind_; }

 private:
  ErrorCode code_;
  std::string kind_;
};

struct ConfigError : Error {
  explicit ConfigError(const std::string& what) : Error(ErrorCode::config, "config", what) {}
};

struct DimensionError : Error {
  explicit DimensionError(const std::string& what) : Error(ErrorCode::config, "dimension", what) {}
};

struct GeometryError : Error {
  explicit GeometryError(const std::string& what) : Error(ErrorCode::config, "geometry", what) {}
};

struct InputError : Error {
  explicit InputError(const std::string& what) : Error(ErrorCode::input, "input", what) {}
};

struct FormatError : Error {
  explicit FormatError(const std::string& what) : Error(ErrorCode::input, "format", what) {}
};

struct UnsupportedError : Error {
  explicit UnsupportedError(const std::string& what) : Error(ErrorCode::input, "unsupported", what) {}
};

struct DegenerateError : Error {
  explicit DegenerateError(const std::string& what) : Error(ErrorCode::numeric, "degenerate", what) {}
};

struct ConditioningError : Error {
  explicit ConditioningError(const std::string& what) : Error(ErrorCode::numeric, "conditioning", what) {}
};

}  // namespace dcpkit
