#pragma once

#include <stdexcept>
#include <string>

namespace stv {

/// Error raised by every library routine on a contract violation.
///
/// `code()` is a short machine-readable tag (e.g. "shape_mismatch",
/// "bad_magic") that the CLI prints ahead of the human-readable message.
class Error : public std::runtime_error {
 public:
  Error(std::string code, const std::string& message)
      : std::runtime_error(message), code_(std::move(code)) {}

  const std::string& code() const noexcept { return code_; }

 private:
  std::string code_;
};

}  // namespace stv
