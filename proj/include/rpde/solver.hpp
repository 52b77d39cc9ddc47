#pragma once

#include <cstddef>
#include <functional>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

#include "rpde/initial_data.hpp"
#include "rpde/radial_core.hpp"

namespace rpde {

enum class Scheme { explicit_euler, semi_implicit };

struct SolverConfig {
  double epsilon = 1e-10;  ///< Dirichlet value at r = R
  Scheme scheme = Scheme::semi_implicit;
  /// Explicit: fraction of the stability limit. Semi-implicit: target
  /// relative change per step, via ds = cfl_safety · r_half² / max v.
  double cfl_safety = 0.5;
  double ds_init = 1e-6;
  double ds_max = 1e300;
  double growth = 1.1;  ///< semi-implicit step growth cap per step
  double s_end = 1.0;
  /// Stop once ∫_0^s ∫v ≥ t_target (0 disables); used to reach a target
  /// horizon of the transformed clock.
  double t_target = 0.0;
  std::vector<double> snapshot_times;  ///< landed on exactly
  std::vector<double> p_list;          ///< exponents for ∫v^p and its dissipation
  /// Two half steps combined with one full step (second order in time).
  bool extrapolate = true;
  int max_halvings = 40;
  std::size_t record_stride = 1;
  std::size_t max_steps = 10'000'000;

  void validate() const;
};

class SolverError : public std::runtime_error {
 public:
  enum class Kind { positivity_lost, linear_solve_failure, step_collapse, max_principle };
  SolverError(Kind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

struct Snapshot {
  double s;
  RadialField v;
};

/// ∫v^p and its dissipation ∫v^{p-1}|∇v|² per recorded step, plus the running
/// trapezoid integral of the dissipation accumulated at every accepted step.
struct PSeries {
  double p;
  std::vector<double> integral;
  std::vector<double> dissipation;
  std::vector<double> cumulative;
};

struct SolutionTrace {
  std::vector<double> s;
  std::vector<double> mass;
  std::vector<double> K;
  std::vector<double> sup;
  std::vector<double> center;
  std::vector<PSeries> lp;
  std::vector<Snapshot> snapshots;

  double v0_max = 0.0;
  double epsilon = 0.0;
  std::size_t accepted_steps = 0;
  std::size_t rejected_steps = 0;

  std::size_t size() const { return s.size(); }
  const PSeries* series_for(double p) const;
};

/// Header `s,mass,K,sup,center,lp_<p>...`, full precision.
void write_trace_csv(std::ostream& out, const SolutionTrace& trace);

/// Observer invoked after each accepted step with the old and new states.
struct StepView {
  double s_prev;
  const RadialField& v_prev;
  double s_next;
  const RadialField& v_next;
};
using StepObserver = std::function<void(const StepView&)>;

/// One step of v_s = v Δv with the boundary node pinned to ε.
///   explicit_euler: v' = v + ds v Δv
///   semi_implicit:  (I - ds diag(v) Δ) v' = v
/// Throws SolverError(positivity_lost) if any node ends up ≤ 0 and
/// SolverError(linear_solve_failure) on a singular tridiagonal system.
RadialField step(const RadialField& v, double ds, const SolverConfig& cfg);

/// Step size: explicit uses cfl_safety · min Δr² / (2n max v); semi-implicit
/// uses min(growth · ds_prev, cfl_safety · r_half² / max v). Both are clamped
/// to [ds_init, ds_max]. `ds_prev <= 0` means first step.
double cfl_timestep(const RadialField& v, const SolverConfig& cfg, double ds_prev = 0.0);

/// Radius where v first falls to half of v(0) (linear interpolation), R if never.
double half_radius(const RadialField& v);

SolutionTrace solve(const RadialField& v0, const SolverConfig& cfg,
                    const StepObserver& observer = {});

struct EpsilonContinuation {
  std::vector<double> eps;
  std::vector<SolutionTrace> runs;
  bool monotone = true;
  double worst_violation = 0.0;    ///< largest v_{ε_{k+1}} - v_{ε_k} over snapshots
  std::vector<double> increments;  ///< max |v_{ε_k} - v_{ε_{k+1}}| over snapshots
  double regularization_error = 0.0;
};

/// Solves from base + ε for each ε in a decreasing list. `base` should vanish
/// at r = R. Snapshots must be configured in cfg.
EpsilonContinuation epsilon_continuation(const RadialField& base, const SolverConfig& cfg,
                                         const std::vector<double>& eps_list);

struct DomainContinuation {
  std::vector<double> radii;
  std::vector<SolutionTrace> runs;
  std::vector<double> tail_mass;
  bool monotone = true;
  double worst_violation = 0.0;    ///< largest v_{R_k} - v_{R_{k+1}} on the common ball
  std::vector<double> increments;  ///< mass increments at the final snapshot
};

/// Re-grids at each radius with fixed spacing `dr`, keeping the profile's
/// amplitude fixed (normalized on the largest ball) so data increase with R.
DomainContinuation domain_continuation(const DecayFamily& family, int dim, double dr,
                                       const SolverConfig& cfg, const std::vector<double>& radii,
                                       double eps_abs);

}  // namespace rpde
