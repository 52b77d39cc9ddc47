#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "json.hpp"
#include "rpde/radial_core.hpp"
#include "rpde/solver.hpp"

namespace rpde {

/// |∫v^p(s) + p² ∫_0^s ∫v^{p-1}|∇v|² - ∫v_0^p| along a trace.
struct IdentityResidual {
  double p = 1.0;
  double worst_abs = 0.0;
  double worst_rel = 0.0;  ///< worst_abs / ∫v_0^p
  std::vector<double> series;  ///< aligned with trace.s
  std::size_t n_samples = 0;
};

/// Throws std::invalid_argument if the trace carries no series for p.
IdentityResidual lp_identity_residual(const SolutionTrace& trace, double p);

/// `{p, worst_abs, worst_rel, n_samples}`
nlohmann::json to_json(const IdentityResidual& r);

struct EnergyInequality {
  double lhs = 0.0;  ///< (∫|∇φ|²)²
  double rhs = 0.0;  ///< ∫φ|Δφ|²
  bool ok = true;
};

/// Checks (∫|∇φ|²)² <= ∫φ|Δφ|² (1 + tol) for a nonnegative field with ∫φ <= 1.
/// Throws std::domain_error if ∫φ exceeds 1 + 1e-6.
EnergyInequality energy_inequality_check(const RadialField& field, double tol = 1e-2);

struct MonotonicityReport {
  std::size_t violations = 0;
  double max_uptick = 0.0;  ///< largest relative increase L[i+1]/L[i] - 1
  bool decay_checked = false;  ///< true when t_end / t_start >= 1e3
  bool decays = true;          ///< L(t_end) < L(t_start) / 10 when checked
};

/// Counts indices where L increases by more than rel_tol·L + abs_tol.
MonotonicityReport energy_monotonicity_check(std::span<const double> t, std::span<const double> L,
                                             double rel_tol = 1e-6, double abs_tol = 1e-12);

}  // namespace rpde
