#include "topp3/log.hpp"

#include <cstdlib>
#include <cstring>

#include "topp3/error.hpp"

namespace topp3 {

const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::DomainError: return "DomainError";
    case ErrorCode::RangeError: return "RangeError";
    case ErrorCode::InvalidPathSpec: return "InvalidPathSpec";
    case ErrorCode::DegeneratePath: return "DegeneratePath";
    case ErrorCode::InconsistentBoundary: return "InconsistentBoundary";
    case ErrorCode::Precondition: return "Precondition";
    case ErrorCode::UnsupportedDoubleZero: return "UnsupportedDoubleZero";
    case ErrorCode::SingularJerkUndefined: return "SingularJerkUndefined";
    case ErrorCode::EmptySingularCurve: return "EmptySingularCurve";
    case ErrorCode::SchemaError: return "SchemaError";
  }
  return "UnknownError";
}

LogLevel log_level() {
  static LogLevel level = [] {
    const char* env = std::getenv("TOPP3_LOG");
    if (!env) return LogLevel::Quiet;
    if (std::strcmp(env, "debug") == 0) return LogLevel::Debug;
    if (std::strcmp(env, "info") == 0) return LogLevel::Info;
    return LogLevel::Quiet;
  }();
  return level;
}

void log_info(const std::string& msg) {
  if (log_level() >= LogLevel::Info) std::fprintf(stderr, "[topp3] %s\n", msg.c_str());
}

void log_debug(const std::string& msg) {
  if (log_level() >= LogLevel::Debug) std::fprintf(stderr, "[topp3] %s\n", msg.c_str());
}

void log_warn(const std::string& msg) {
  std::fprintf(stderr, "[topp3] warning: %s\n", msg.c_str());
}

std::string fmt_g12(double value) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.12g", value);
  return buf;
}

}  // namespace topp3
