#include "rpde/functionals.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace rpde {

IdentityResidual lp_identity_residual(const SolutionTrace& trace, double p) {
  const PSeries* ps = trace.series_for(p);
  if (!ps) throw std::invalid_argument("identity residual: trace has no series for this p");
  if (ps->integral.empty()) throw std::invalid_argument("identity residual: empty trace");

  IdentityResidual out;
  out.p = p;
  out.n_samples = ps->integral.size();
  out.series.resize(out.n_samples);
  const double initial = ps->integral.front();
  for (std::size_t i = 0; i < out.n_samples; ++i) {
    const double r = std::abs(ps->integral[i] + p * p * ps->cumulative[i] - initial);
    out.series[i] = r;
    out.worst_abs = std::max(out.worst_abs, r);
  }
  out.worst_rel = initial > 0.0 ? out.worst_abs / initial : out.worst_abs;
  return out;
}

nlohmann::json to_json(const IdentityResidual& r) {
  return {{"p", r.p}, {"worst_abs", r.worst_abs}, {"worst_rel", r.worst_rel},
          {"n_samples", r.n_samples}};
}

EnergyInequality energy_inequality_check(const RadialField& field, double tol) {
  const double mass = integrate(field);
  if (mass > 1.0 + 1e-6) throw std::domain_error("energy inequality: requires integral <= 1");
  const RadialField lap = radial_laplacian(field);
  const auto w = field.grid().quad_weights();

  // Work in units of max|φ| so tiny late-time fields do not underflow.
  double scale = 0.0;
  for (double x : field.values()) scale = std::max(scale, std::abs(x));
  EnergyInequality out;
  if (scale == 0.0) return out;

  double rhs = 0.0;
  for (std::size_t i = 0; i < field.size(); ++i) {
    const double d = lap[i] / scale;
    rhs += w[i] * (field[i] / scale) * d * d;
  }
  const double k = dirichlet_energy(field) / (scale * scale);
  // lhs = k² scale⁴, rhs = rhs·scale³; compare after dividing by scale³.
  out.lhs = k * k * scale * scale * scale * scale;
  out.rhs = rhs * scale * scale * scale;
  out.ok = k * k * scale <= rhs * (1.0 + tol);
  return out;
}

MonotonicityReport energy_monotonicity_check(std::span<const double> t, std::span<const double> L,
                                             double rel_tol, double abs_tol) {
  if (t.size() != L.size()) throw std::invalid_argument("monotonicity: size mismatch");
  MonotonicityReport out;
  for (std::size_t i = 1; i < L.size(); ++i) {
    const double rise = L[i] - L[i - 1];
    if (rise > rel_tol * std::abs(L[i - 1]) + abs_tol) {
      ++out.violations;
    }
    if (L[i - 1] > 0.0) out.max_uptick = std::max(out.max_uptick, rise / L[i - 1]);
  }
  if (t.size() >= 2 && t.front() > 0.0 && t.back() / t.front() >= 1e3) {
    out.decay_checked = true;
    out.decays = L.back() < L.front() / 10.0;
  }
  return out;
}

}  // namespace rpde
