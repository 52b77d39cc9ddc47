#pragma once

#include <cstddef>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

#include "rpde/functionals.hpp"
#include "rpde/radial_core.hpp"
#include "rpde/solver.hpp"

namespace rpde {

class TransformError : public std::runtime_error {
 public:
  enum class Kind { non_positive_mass, mass_energy_mismatch, bad_initial_mass, out_of_coverage };
  TransformError(Kind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

/// Output times: 0 followed by `count` log-spaced values in [t_min, t_max].
struct TGridSpec {
  std::size_t count = 200;
  double t_min = 1e-2;
  double t_max = 1e3;

  void validate() const;
  std::vector<double> nodes() const;
};

/// Time change between the clock s of v_s = vΔv and the clock t of the
/// unit-mass problem. H'(s) is the measured mass, linear between trace nodes,
/// so H is piecewise quadratic and h = H⁻¹ is evaluated exactly.
struct TransformTables {
  std::vector<double> s_nodes;
  std::vector<double> Hprime;
  std::vector<double> Hprime_energy;  ///< 1 - ∫_0^s K, for cross-checking
  std::vector<double> H;
  std::vector<double> G;
  std::vector<double> K;

  std::vector<double> t_nodes;
  std::vector<double> h;
  std::vector<double> g;
  std::vector<double> E;  ///< ln g
  std::vector<double> L;  ///< G(h)² K(h)

  double attained_t_max = 0.0;  ///< H at the end of the trace
  bool truncated = false;       ///< requested t_max exceeded attained_t_max
  IdentityResidual mass_balance;
  std::vector<std::string> warnings;

  /// H(s) on [0, s_end].
  double H_at(double s) const;
  /// H⁻¹(t) on [0, attained_t_max]; throws TransformError(out_of_coverage).
  double h_at(double t) const;
};

/// Tabulates H, G over the trace and h, g, E, L over the t-grid. Nodes beyond
/// the attained horizon are dropped (and flagged). Throws TransformError when
/// the initial mass is not 1 ± 1e-3, any mass is non-positive, or the p = 1
/// identity residual exceeds `max_mismatch` relative.
TransformTables build_tables(const SolutionTrace& trace, const TGridSpec& spec,
                             double max_mismatch = 1e-2);

/// u(·, t) = g(t) v(·, h(t)) at a single output time.
struct USample {
  double t;
  double s;
  double g;
  RadialField u;
};

/// Step observer that accumulates H exactly as build_tables does and stores
/// u at every requested t as the solver passes it. Requires record_stride = 1
/// so that both see the same mass samples.
class TimeChangeSampler {
 public:
  TimeChangeSampler(std::vector<double> t_targets, const RadialField& v0);

  void operator()(const StepView& step);
  StepObserver observer();

  const std::vector<USample>& samples() const { return samples_; }

 private:
  std::vector<double> targets_;
  std::size_t next_ = 0;
  double H_ = 0.0;
  double mass_ = 0.0;
  std::vector<USample> samples_;
};

/// g(t) times the linear-in-s interpolation of the two snapshots bracketing
/// h(t). Throws TransformError(out_of_coverage) when h(t) is not bracketed.
RadialField assemble_u(const TransformTables& tables, const SolutionTrace& trace, double t);

/// ln g(t) by monotone (PCHIP) interpolation of the E table.
double energy_E(const TransformTables& tables, double t);

struct TransformDiagnostics {
  double inverse_error = 0.0;       ///< max |h(H(s_j)) - s_j| / s_j
  double h_prime_vs_g = 0.0;        ///< max |h' - g| / g
  double g_prime_vs_gL = 0.0;       ///< max |g' - gL| / (gL)
  double energy_integral_gap = 0.0; ///< max |E - ∫_0^t L| / max(E, 1e-2) along the s-trace
  bool E_over_t_decreasing = true;  ///< over the last two decades of t
  bool h_prime_nondecreasing = true;
};

TransformDiagnostics check_identities(const TransformTables& tables);

/// `t,h,g,E,L`
void write_t_table_csv(std::ostream& out, const TransformTables& tables);
/// `s,Hprime,H,G`
void write_s_table_csv(std::ostream& out, const TransformTables& tables);

}  // namespace rpde
