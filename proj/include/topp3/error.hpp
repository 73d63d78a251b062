#pragma once

#include <stdexcept>
#include <string>

namespace topp3 {

enum class ErrorCode {
  DomainError,          // argument outside the path domain [0, s_end]
  RangeError,           // query outside a profile's s-range
  InvalidPathSpec,      // breakpoints/continuity/degree violations
  DegeneratePath,       // ||q_s|| = 0 where a tangent is required
  InconsistentBoundary, // boundary velocity not parallel to the path tangent
  Precondition,         // generic precondition violation
  UnsupportedDoubleZero,// a_k and b_k both vanish at s*
  SingularJerkUndefined,// |a_k' + b_k| below threshold in the singular jerk
  EmptySingularCurve,   // the LP at s* is infeasible
  SchemaError,          // malformed scenario/trajectory file
};

const char* to_string(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}
  ErrorCode code() const { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void raise(ErrorCode code, const std::string& what) {
  throw Error(code, what);
}

}  // namespace topp3
