#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace arflow {

/// Precondition or shape contract broken by the caller.
class ContractViolation : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// A NaN or Inf showed up where the math promised finite values.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Data dimensionality disagrees with a model or checkpoint.
class DimensionError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A report has nothing to report, e.g. every dimension is constant.
class EmptyReportError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& what, std::size_t line)
      : std::runtime_error(line > 0 ? "line " + std::to_string(line) + ": " + what : what),
        line_(line) {}

  /// 1-based line number in the offending file, 0 when not line-specific.
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

class CorruptFileError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class VersionError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invariant check that survives NDEBUG.
inline void require(bool cond, const std::string& msg) {
  if (!cond) throw ContractViolation(msg);
}

}  // namespace arflow
