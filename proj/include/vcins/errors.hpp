#pragma once

#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace vcins {

/// Machine-readable error category. The CLI maps each one to its own exit code.
enum class ErrorCategory {
  validation,
  domain,
  range,
  solver,
  precondition,
  unsupported,
  contract,
  inconsistency,
  io,
};

inline std::string_view to_string(ErrorCategory c) {
  switch (c) {
    case ErrorCategory::validation: return "validation";
    case ErrorCategory::domain: return "domain";
    case ErrorCategory::range: return "range";
    case ErrorCategory::solver: return "solver";
    case ErrorCategory::precondition: return "precondition";
    case ErrorCategory::unsupported: return "unsupported";
    case ErrorCategory::contract: return "contract";
    case ErrorCategory::inconsistency: return "inconsistency";
    case ErrorCategory::io: return "io";
  }
  return "unknown";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorCategory category, const std::string& what)
      : std::runtime_error(what), category_(category) {}

  ErrorCategory category() const noexcept { return category_; }

 private:
  ErrorCategory category_;
};

/// Carries every violated invariant, not just the first one.
class ValidationError : public Error {
 public:
  explicit ValidationError(std::vector<std::string> problems)
      : Error(ErrorCategory::validation, join(problems)), problems_(std::move(problems)) {}

  const std::vector<std::string>& problems() const noexcept { return problems_; }

 private:
  static std::string join(const std::vector<std::string>& items) {
    std::string out;
    for (const auto& s : items) {
      if (!out.empty()) out += "; ";
      out += s;
    }
    return out;
  }

  std::vector<std::string> problems_;
};

class DomainError : public Error {
 public:
  DomainError(const std::string& what, double wealth)
      : Error(ErrorCategory::domain, what), wealth_(wealth) {}

  double wealth() const noexcept { return wealth_; }

 private:
  double wealth_;
};

class RangeError : public Error {
 public:
  explicit RangeError(const std::string& what) : Error(ErrorCategory::range, what) {}
};

/// Non-convergence or a failed bracket. Carries the best residuals seen.
class SolverError : public Error {
 public:
  SolverError(const std::string& what, double mean_residual, double variance_residual)
      : Error(ErrorCategory::solver, what),
        mean_residual_(mean_residual),
        variance_residual_(variance_residual) {}

  double mean_residual() const noexcept { return mean_residual_; }
  double variance_residual() const noexcept { return variance_residual_; }

 private:
  double mean_residual_;
  double variance_residual_;
};

class PreconditionError : public Error {
 public:
  explicit PreconditionError(const std::string& what) : Error(ErrorCategory::precondition, what) {}
};

class UnsupportedScenario : public Error {
 public:
  explicit UnsupportedScenario(const std::string& what) : Error(ErrorCategory::unsupported, what) {}
};

class ContractViolation : public Error {
 public:
  explicit ContractViolation(const std::string& what) : Error(ErrorCategory::contract, what) {}
};

class InconsistencyError : public Error {
 public:
  explicit InconsistencyError(const std::string& what)
      : Error(ErrorCategory::inconsistency, what) {}
};

class IoError : public Error {
 public:
  explicit IoError(const std::string& what) : Error(ErrorCategory::io, what) {}
};

}  // namespace vcins
