#pragma once

#include <stdexcept>
#include <string>

namespace cme {

enum class ErrorKind {
  InvalidInput,
  OutOfDomain,
  DegenerateWeights,
  Parse,
};

inline const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::InvalidInput: return "invalid-input";
    case ErrorKind::OutOfDomain: return "out-of-domain";
    case ErrorKind::DegenerateWeights: return "degenerate-weights";
    case ErrorKind::Parse: return "parse";
  }
  return "unknown";
}

// Every failure raised by the library carries one of the kinds above so that
// callers (and the CLI) can tell a malformed input from a numerical edge case.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace cme
