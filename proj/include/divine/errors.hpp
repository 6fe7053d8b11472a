#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace divine {

// Shape mismatch between operands. The message names the offending operand.
class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Invalid hyperparameter or structural configuration.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class SequenceTooShort : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class LabelError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// NaN/Inf encountered in a loss term or gradient.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Requested inference path is not defined for the model (e.g. audio-only
// with an asymmetric cycle decoder in strict mode).
class UnsupportedConfiguration : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Finite-difference oracle cannot be trusted because the loss is not a
// deterministic function of the parameters.
class OracleInvalid : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvariantViolation : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

// Binary container decoding failure.
class ParseError : public std::runtime_error {
 public:
  enum class Kind { bad_magic, bad_version, dimension_overflow, truncated, trailing_bytes, io };

  ParseError(Kind kind, std::size_t offset, const std::string& what)
      : std::runtime_error(what + " (at byte offset " + std::to_string(offset) + ")"),
        kind_(kind),
        offset_(offset) {}

  Kind kind() const noexcept { return kind_; }
  std::size_t offset() const noexcept { return offset_; }

 private:
  Kind kind_;
  std::size_t offset_;
};

// Aggregated dataset validation report.
class ValidationError : public std::runtime_error {
 public:
  explicit ValidationError(std::vector<std::string> issues, const std::string& subject = "dataset")
      : std::runtime_error(join(subject, issues)), issues_(std::move(issues)) {}

  const std::vector<std::string>& issues() const noexcept { return issues_; }

 private:
  static std::string join(const std::string& subject, const std::vector<std::string>& issues) {
    std::string out = subject + " validation failed (" + std::to_string(issues.size()) + " issue(s))";
    for (const auto& s : issues) out += "\n  - " + s;
    return out;
  }

  std::vector<std::string> issues_;
};

}  // namespace divine
