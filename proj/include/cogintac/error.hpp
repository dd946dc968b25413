#pragma once

#include <stdexcept>
#include <string>

namespace cogintac {

/// Failure categories. The CLI maps each to a distinct exit code.
enum class ErrorCategory {
  usage = 2,
  config = 3,
  parse = 4,
  label = 5,
  format = 6,
  data = 7,
  numeric = 8,
  training = 9,
  generation = 10,
  input = 11,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorCategory category, const std::string& what)
      : std::runtime_error(what), category_(category) {}

  ErrorCategory category() const noexcept { return category_; }
  int exit_code() const noexcept { return static_cast<int>(category_); }

 private:
  ErrorCategory category_;
};

struct ConfigError : Error {
  explicit ConfigError(const std::string& w) : Error(ErrorCategory::config, w) {}
};

/// Unreadable input record; carries the 1-based line number.
struct ParseError : Error {
  ParseError(std::size_t line, const std::string& w)
      : Error(ErrorCategory::parse, "line " + std::to_string(line) + ": " + w), line(line) {}
  std::size_t line;
};

/// Unknown label string; `field` names the offending key.
struct LabelError : Error {
  LabelError(std::string field_name, const std::string& value)
      : Error(ErrorCategory::label,
              "unknown label '" + value + "' for field '" + field_name + "'"),
        field(std::move(field_name)) {}
  std::string field;
};

struct FormatError : Error {
  explicit FormatError(const std::string& w) : Error(ErrorCategory::format, w) {}
};

struct DataError : Error {
  explicit DataError(const std::string& w) : Error(ErrorCategory::data, w) {}
};

/// A loaded artifact violates a value invariant (e.g. a non-normalized
/// distribution).
struct InvariantError : Error {
  explicit InvariantError(const std::string& w) : Error(ErrorCategory::format, w) {}
};

/// Shape or wiring mismatch, raised when components are connected.
struct DimensionError : Error {
  explicit DimensionError(const std::string& w) : Error(ErrorCategory::config, w) {}
};

struct NumericError : Error {
  explicit NumericError(const std::string& w) : Error(ErrorCategory::numeric, w) {}
};

struct TrainingError : Error {
  explicit TrainingError(const std::string& w) : Error(ErrorCategory::training, w) {}
};

struct GenerationError : Error {
  explicit GenerationError(const std::string& w) : Error(ErrorCategory::generation, w) {}
};

struct InputError : Error {
  explicit InputError(const std::string& w) : Error(ErrorCategory::input, w) {}
};

}  // namespace cogintac
