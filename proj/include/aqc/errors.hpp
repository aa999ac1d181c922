#pragma once

#include <stdexcept>
#include <string>

namespace aqc {

/// Failure categories. Each maps to one CLI exit code.
enum class ErrorKind {
  InvalidInput,      // exit 2
  Infeasible,        // exit 1
  NumericalFailure,  // exit 3
  Structural,        // exit 3 (broken internal invariant)
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message, std::string stage = {})
      : std::runtime_error(stage.empty() ? message : "[" + stage + "] " + message),
        kind_(kind),
        stage_(std::move(stage)) {}

  ErrorKind kind() const noexcept { return kind_; }
  const std::string& stage() const noexcept { return stage_; }

 private:
  ErrorKind kind_;
  std::string stage_;
};

inline Error invalid_input(const std::string& msg) { return {ErrorKind::InvalidInput, msg}; }
inline Error infeasible(const std::string& msg) { return {ErrorKind::Infeasible, msg}; }
inline Error numerical_failure(const std::string& msg) { return {ErrorKind::NumericalFailure, msg}; }
inline Error structural(const std::string& msg) { return {ErrorKind::Structural, msg}; }

/// Rethrows `e` with a stage tag attached, keeping its kind.
[[noreturn]] inline void rethrow_with_stage(const Error& e, const std::string& stage) {
  if (!e.stage().empty()) throw e;
  throw Error(e.kind(), e.what(), stage);
}

int exit_code(ErrorKind kind) noexcept;

}  // namespace aqc
