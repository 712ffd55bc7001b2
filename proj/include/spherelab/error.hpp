#ifndef SPHERELAB_ERROR_HPP
#define SPHERELAB_ERROR_HPP

#include <stdexcept>
#include <string>

namespace spherelab {

enum class ErrorKind {
  tolerance_not_reached,
  shooting_bracket_failure,
  eigensolver_failure,
  ellipticity_violation,
  no_critical_point,
  degenerate_critical_point,
  length_mismatch,
  out_of_configuration_set,
  newton_divergence,
  hessian_singular,
  left_configuration_set,
  converged_to_zero,
  truncation_saturated,
  no_sign_change,
  insufficient_family,
  bracket_failure,
  config_invalid
};

inline const char* to_string(ErrorKind k)
{
  switch (k) {
    case ErrorKind::tolerance_not_reached: return "tolerance-not-reached";
    case ErrorKind::shooting_bracket_failure: return "shooting-bracket-failure";
    case ErrorKind::eigensolver_failure: return "eigensolver-failure";
    case ErrorKind::ellipticity_violation: return "ellipticity-violation";
    case ErrorKind::no_critical_point: return "no-critical-point";
    case ErrorKind::degenerate_critical_point: return "degenerate-critical-point";
    case ErrorKind::length_mismatch: return "length-mismatch";
    case ErrorKind::out_of_configuration_set: return "out-of-configuration-set";
    case ErrorKind::newton_divergence: return "newton-divergence";
    case ErrorKind::hessian_singular: return "hessian-singular";
    case ErrorKind::left_configuration_set: return "left-configuration-set";
    case ErrorKind::converged_to_zero: return "converged-to-zero";
    case ErrorKind::truncation_saturated: return "truncation-saturated";
    case ErrorKind::no_sign_change: return "no-sign-change";
    case ErrorKind::insufficient_family: return "insufficient-family";
    case ErrorKind::bracket_failure: return "bracket-failure";
    case ErrorKind::config_invalid: return "config-invalid";
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

} // namespace spherelab

#endif
