#ifndef NETCONFORM_ERROR_HPP
#define NETCONFORM_ERROR_HPP

#include <stdexcept>
#include <string>
#include <string_view>

namespace netconform {

/// Machine-readable failure categories. The CLI writes `code_name()` into the
/// run manifest when a command fails.
enum class ErrorCode {
  parameter,
  rank,
  solvability,
  degeneracy,
  fit,
  selection,
  parse,
  io,
  config,
};

inline std::string_view code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::parameter: return "parameter_error";
    case ErrorCode::rank: return "rank_error";
    case ErrorCode::solvability: return "solvability_error";
    case ErrorCode::degeneracy: return "degeneracy_error";
    case ErrorCode::fit: return "fit_error";
    case ErrorCode::selection: return "selection_error";
    case ErrorCode::parse: return "parse_error";
    case ErrorCode::io: return "io_error";
    case ErrorCode::config: return "config_error";
  }
  return "unknown_error";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& what) {
  throw Error(code, what);
}

inline void require(bool condition, ErrorCode code, const std::string& what) {
  if (!condition) fail(code, what);
}

}  // namespace netconform

#endif  // NETCONFORM_ERROR_HPP
