#pragma once

#include <stdexcept>
#include <string>

namespace rfbsde {

/// Failure categories; the numeric values are the CLI exit codes.
enum class ErrorKind : int {
  verification = 1,
  config = 2,
  numerical = 3,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, std::string code, const std::string& message)
      : std::runtime_error(message), kind_(kind), code_(std::move(code)) {}

  ErrorKind kind() const noexcept { return kind_; }
  /// Short machine-greppable identifier such as "E_CONFIG_UNKNOWN_KEY".
  const std::string& code() const noexcept { return code_; }
  int exit_code() const noexcept { return static_cast<int>(kind_); }

 private:
  ErrorKind kind_;
  std::string code_;
};

class ConfigError : public Error {
 public:
  ConfigError(std::string code, const std::string& message)
      : Error(ErrorKind::config, std::move(code), message) {}
};

class NumericalError : public Error {
 public:
  NumericalError(std::string code, const std::string& message)
      : Error(ErrorKind::numerical, std::move(code), message) {}
};

}  // namespace rfbsde
