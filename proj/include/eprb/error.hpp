#pragma once

#include <stdexcept>
#include <string>

namespace eprb {

/// Failure category. The CLI maps each kind onto a process exit code.
enum class ErrorKind {
  usage,      // invalid argument or configuration
  format,     // malformed or inconsistent input data
  numerical,  // singularity, no convergence, no coincidences
  io,
};

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

}  // namespace eprb
