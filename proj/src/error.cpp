#include "vnreg/error.hpp"

namespace vnreg {

const char* ToString(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kValidation: return "validation error";
    case ErrorKind::kRank: return "rank error";
    case ErrorKind::kRange: return "range error";
    case ErrorKind::kDegenerate: return "degenerate input";
    case ErrorKind::kConvergence: return "convergence error";
    case ErrorKind::kDimension: return "dimension error";
    case ErrorKind::kSize: return "size error";
    case ErrorKind::kTrim: return "trim error";
    case ErrorKind::kQuery: return "query error";
    case ErrorKind::kCoverage: return "coverage error";
    case ErrorKind::kFeasibility: return "feasibility error";
    case ErrorKind::kParse: return "parse error";
    case ErrorKind::kIo: return "i/o error";
    case ErrorKind::kConfig: return "config error";
  }
  return "error";
}

void RethrowWithStage(const Error& e, const std::string& stage) {
  throw Error(e.kind(), stage + ": " + e.what());
}

}  // namespace vnreg
