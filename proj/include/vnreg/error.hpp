#pragma once

#include <stdexcept>
#include <string>

namespace vnreg {

enum class ErrorKind {
  kValidation,
  kRank,
  kRange,
  kDegenerate,
  kConvergence,
  kDimension,
  kSize,
  kTrim,
  kQuery,
  kCoverage,
  kFeasibility,
  kParse,
  kIo,
  kConfig,
};

const char* ToString(ErrorKind kind);

// Single exception type for the library; `kind` lets callers (the CLI in
// particular) map failures to exit codes without string matching.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

// Adds a pipeline stage name to an error while keeping its kind.
[[noreturn]] void RethrowWithStage(const Error& e, const std::string& stage);

}  // namespace vnreg
