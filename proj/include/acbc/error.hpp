#pragma once

#include <stdexcept>
#include <string>

namespace acbc {

/// Failure categories. The CLI maps each one to a stable exit code.
enum class ErrorKind {
  InvalidArgument,
  Syntax,
  Dimension,
  Domain,
  Config,
  Richness,
  Infeasible,
  LevelSeparation,
  Numerical,
  Io,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

const char* to_string(ErrorKind kind) noexcept;

}  // namespace acbc
