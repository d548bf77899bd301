#pragma once

#include <stdexcept>
#include <string>

namespace p2s {

/// Error categories raised by the library. The CLI maps these onto exit codes.
enum class Errc {
  invalid_argument,
  unsupported_format,
  corrupt_header,
  dimension_mismatch,
  io_failure,
  degenerate_input,
  shape_mismatch,
  numerical_error,
  stale_gradient,
  training_aborted,
};

inline const char* to_string(Errc code) {
  switch (code) {
    case Errc::invalid_argument: return "invalid_argument";
    case Errc::unsupported_format: return "unsupported_format";
    case Errc::corrupt_header: return "corrupt_header";
    case Errc::dimension_mismatch: return "dimension_mismatch";
    case Errc::io_failure: return "io_failure";
    case Errc::degenerate_input: return "degenerate_input";
    case Errc::shape_mismatch: return "shape_mismatch";
    case Errc::numerical_error: return "numerical_error";
    case Errc::stale_gradient: return "stale_gradient";
    case Errc::training_aborted: return "training_aborted";
  }
  return "unknown";
}

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

[[noreturn]] inline void fail(Errc code, const std::string& what) { throw Error(code, what); }

inline void require(bool cond, Errc code, const std::string& what) {
  if (!cond) fail(code, what);
}

}  // namespace p2s
