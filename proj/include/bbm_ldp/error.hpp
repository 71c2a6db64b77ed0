#ifndef BBM_LDP_ERROR_HPP
#define BBM_LDP_ERROR_HPP

#include <stdexcept>
#include <string>

namespace bbm_ldp {

// Failure categories; the CLI maps each one to its own exit code.
enum class ErrorCategory {
  config_invalid,
  solver_instability,
  particle_cap,
  domain_overflow,
  acceptance_fail,
};

inline const char* to_string(ErrorCategory c) {
  switch (c) {
    case ErrorCategory::config_invalid: return "config-invalid";
    case ErrorCategory::solver_instability: return "solver-instability";
    case ErrorCategory::particle_cap: return "particle-cap";
    case ErrorCategory::domain_overflow: return "domain-overflow";
    case ErrorCategory::acceptance_fail: return "acceptance-fail";
  }
  return "unknown";
}

inline int exit_code(ErrorCategory c) {
  switch (c) {
    case ErrorCategory::config_invalid: return 2;
    case ErrorCategory::solver_instability: return 3;
    case ErrorCategory::particle_cap: return 4;
    case ErrorCategory::domain_overflow: return 5;
    case ErrorCategory::acceptance_fail: return 6;
  }
  return 1;
}

class Error : public std::runtime_error {
 public:
  Error(ErrorCategory category, const std::string& what)
      : std::runtime_error(what), category_(category) {}

  ErrorCategory category() const noexcept { return category_; }

 private:
  ErrorCategory category_;
};

/// Invalid argument or precondition violation.
inline Error config_error(const std::string& what) {
  return Error(ErrorCategory::config_invalid, what);
}

}  // namespace bbm_ldp

#endif  // BBM_LDP_ERROR_HPP
