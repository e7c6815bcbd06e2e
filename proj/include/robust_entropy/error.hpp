#pragma once

#include <stdexcept>
#include <string>

namespace robust_entropy {

/// Failure categories surfaced by the library. The CLI maps them to exit codes.
enum class ErrorKind {
  invalid_input,
  invalid_distribution,
  unknown_regularizer,
  non_convergence,
  degenerate_support,
  support_mismatch,
  nonpositive_reward,
  non_constant_reward,
  budget_exceeded,
  infeasible_params,
  insufficient_points,
  out_of_range,
  divergence,
};

inline const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::invalid_input: return "invalid_input";
    case ErrorKind::invalid_distribution: return "invalid_distribution";
    case ErrorKind::unknown_regularizer: return "unknown_regularizer";
    case ErrorKind::non_convergence: return "non_convergence";
    case ErrorKind::degenerate_support: return "degenerate_support";
    case ErrorKind::support_mismatch: return "support_mismatch";
    case ErrorKind::nonpositive_reward: return "nonpositive_reward";
    case ErrorKind::non_constant_reward: return "non_constant_reward";
    case ErrorKind::budget_exceeded: return "budget_exceeded";
    case ErrorKind::infeasible_params: return "infeasible_params";
    case ErrorKind::insufficient_points: return "insufficient_points";
    case ErrorKind::out_of_range: return "out_of_range";
    case ErrorKind::divergence: return "divergence";
  }
  return "unknown";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& what) { throw Error(kind, what); }

}  // namespace robust_entropy
