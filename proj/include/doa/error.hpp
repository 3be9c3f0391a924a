#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace doa {

enum class ErrorKind {
  invalid_input,
  singular_matrix,
  degenerate_input,
  estimation_failure,
  ill_conditioned,
  precondition,
};

inline std::string_view to_string(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::invalid_input: return "invalid_input";
    case ErrorKind::singular_matrix: return "singular_matrix";
    case ErrorKind::degenerate_input: return "degenerate_input";
    case ErrorKind::estimation_failure: return "estimation_failure";
    case ErrorKind::ill_conditioned: return "ill_conditioned";
    case ErrorKind::precondition: return "precondition";
  }
  return "unknown";
}

/// Single exception type for the library; `kind()` tells callers which
/// contract was violated.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  [[nodiscard]] ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& what) {
  throw Error(kind, what);
}

}  // namespace doa
