#pragma once

#include <stdexcept>
#include <string>

namespace opreg {

// Error categories surfaced to callers (the CLI maps each to a distinct
// exit code).
enum class ErrorCategory { kIo, kSpec, kDomain, kConvergence, kSingular };

class Error : public std::runtime_error {
 public:
  Error(ErrorCategory category, const std::string& message)
      : std::runtime_error(message), category_(category) {}

  ErrorCategory category() const { return category_; }

 private:
  ErrorCategory category_;
};

inline const char* to_string(ErrorCategory c) {
  switch (c) {
    case ErrorCategory::kIo: return "io";
    case ErrorCategory::kSpec: return "spec";
    case ErrorCategory::kDomain: return "domain";
    case ErrorCategory::kConvergence: return "convergence";
    case ErrorCategory::kSingular: return "singularity";
  }
  return "unknown";
}

[[noreturn]] inline void throw_io(const std::string& m) {
  throw Error(ErrorCategory::kIo, m);
}
[[noreturn]] inline void throw_spec(const std::string& m) {
  throw Error(ErrorCategory::kSpec, m);
}
[[noreturn]] inline void throw_domain(const std::string& m) {
  throw Error(ErrorCategory::kDomain, m);
}
[[noreturn]] inline void throw_convergence(const std::string& m) {
  throw Error(ErrorCategory::kConvergence, m);
}
[[noreturn]] inline void throw_singular(const std::string& m) {
  throw Error(ErrorCategory::kSingular, m);
}

}  // namespace opreg
