#pragma once

#include <stdexcept>
#include <string>

namespace schauder {

/// Bad input: a precondition of an operation does not hold.
class DomainError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A numerical procedure could not produce a trustworthy result.
class SolveError : public std::runtime_error {
 public:
  SolveError(std::string kind, const std::string& detail)
      : std::runtime_error(kind + ": " + detail), kind_(std::move(kind)) {}

  const std::string& kind() const noexcept { return kind_; }

 private:
  std::string kind_;
};

/// Malformed configuration text; carries the offending line (0 if unknown)
/// and field name.
class ConfigError : public std::runtime_error {
 public:
  ConfigError(int line, std::string field, const std::string& message)
      : std::runtime_error(format(line, field, message)),
        line_(line),
        field_(std::move(field)) {}

  int line() const noexcept { return line_; }
  const std::string& field() const noexcept { return field_; }

 private:
  static std::string format(int line, const std::string& field, const std::string& message) {
    std::string out = "config";
    if (line > 0) out += ":" + std::to_string(line);
    if (!field.empty()) out += " [" + field + "]";
    return out + ": " + message;
  }

  int line_;
  std::string field_;
};

}  // namespace schauder
