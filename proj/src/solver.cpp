#include "rpde/solver.hpp"

#include <algorithm>
#include <cfloat>
#include <cmath>
#include <cstdio>
#include <ostream>

namespace rpde {

void SolverConfig::validate() const {
  if (!(epsilon > 0.0)) throw std::invalid_argument("solver: epsilon must be positive");
  if (!(cfl_safety > 0.0 && cfl_safety <= 1.0))
    throw std::invalid_argument("solver: cfl_safety must lie in (0, 1]");
  if (!(ds_init > 0.0) || !(ds_init <= ds_max))
    throw std::invalid_argument("solver: need 0 < ds_init <= ds_max");
  if (!(growth >= 1.0)) throw std::invalid_argument("solver: growth must be >= 1");
  if (!(s_end > 0.0)) throw std::invalid_argument("solver: s_end must be positive");
  if (!std::is_sorted(snapshot_times.begin(), snapshot_times.end()))
    throw std::invalid_argument("solver: snapshot_times must be sorted");
  for (double s : snapshot_times)
    if (s < 0.0 || s > s_end) throw std::invalid_argument("solver: snapshot time outside [0, s_end]");
  for (double p : p_list)
    if (!(p > 0.0)) throw std::invalid_argument("solver: p_list entries must be positive");
  if (record_stride == 0) throw std::invalid_argument("solver: record_stride must be >= 1");
}

const PSeries* SolutionTrace::series_for(double p) const {
  for (const auto& ps : lp)
    if (ps.p == p) return &ps;
  return nullptr;
}

void write_trace_csv(std::ostream& out, const SolutionTrace& trace) {
  char buf[64];
  out << "s,mass,K,sup,center";
  for (const auto& ps : trace.lp) {
    std::snprintf(buf, sizeof buf, ",lp_%g", ps.p);
    out << buf;
  }
  out << '\n';
  for (std::size_t i = 0; i < trace.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%.17g", trace.s[i]);
    out << buf;
    for (double x : {trace.mass[i], trace.K[i], trace.sup[i], trace.center[i]}) {
      std::snprintf(buf, sizeof buf, ",%.17g", x);
      out << buf;
    }
    for (const auto& ps : trace.lp) {
      std::snprintf(buf, sizeof buf, ",%.17g", ps.integral[i]);
      out << buf;
    }
    out << '\n';
  }
}

namespace {

void require_positive(const RadialField& v) {
  for (double x : v.values())
    if (!(x > 0.0) || !std::isfinite(x))
      throw SolverError(SolverError::Kind::positivity_lost, "positivity lost");
}

RadialField explicit_step(const RadialField& v, double ds, double eps) {
  const RadialField lap = radial_laplacian(v);
  std::vector<double> out(v.size());
  for (std::size_t i = 0; i + 1 < v.size(); ++i) out[i] = v[i] + ds * v[i] * lap[i];
  out.back() = eps;
  return RadialField(v.grid_ptr(), std::move(out));
}

RadialField implicit_step(const RadialField& v, double ds, double eps) {
  const RadialGrid& g = v.grid();
  const auto c = g.conductances();
  const auto vol = g.cell_volumes();
  const std::size_t m = g.intervals();  // unknowns 0..m-1, node m pinned

  std::vector<double> sub(m), diag(m), sup(m), rhs(m);
  for (std::size_t i = 0; i < m; ++i) {
    const double a = ds * v[i] / vol[i];
    const double left = i > 0 ? a * c[i - 1] : 0.0;
    const double right = a * c[i];
    sub[i] = -left;
    sup[i] = -right;
    diag[i] = 1.0 + left + right;
    rhs[i] = v[i];
  }
  rhs[m - 1] -= sup[m - 1] * eps;

  // Thomas; the matrix is a diagonally dominant M-matrix.
  for (std::size_t i = 1; i < m; ++i) {
    if (!(diag[i - 1] > 0.0) || !std::isfinite(diag[i - 1]))
      throw SolverError(SolverError::Kind::linear_solve_failure, "tridiagonal pivot breakdown");
    const double w = sub[i] / diag[i - 1];
    diag[i] -= w * sup[i - 1];
    rhs[i] -= w * rhs[i - 1];
  }
  if (!(diag[m - 1] > 0.0) || !std::isfinite(diag[m - 1]))
    throw SolverError(SolverError::Kind::linear_solve_failure, "tridiagonal pivot breakdown");

  std::vector<double> out(m + 1);
  out[m] = eps;
  out[m - 1] = rhs[m - 1] / diag[m - 1];
  for (std::size_t i = m - 1; i-- > 0;) out[i] = (rhs[i] - sup[i] * out[i + 1]) / diag[i];
  return RadialField(v.grid_ptr(), std::move(out));
}

// Removes rounding-level excursions above the old maximum (within 64 ulps),
// so the discrete maximum principle can be asserted exactly.
void clip_rounding(std::vector<double>& out, double vmax) {
  const double tol = vmax * (1.0 + 64.0 * DBL_EPSILON);
  for (double& x : out)
    if (x > vmax && x <= tol) x = vmax;
}

// One accepted-step candidate; extrapolated semi-implicit steps are rejected
// (like positivity failures) if they overshoot the old maximum.
RadialField advance(const RadialField& v, double ds, const SolverConfig& cfg) {
  const double vmax = v.max();
  std::vector<double> out;
  if (cfg.scheme == Scheme::semi_implicit && cfg.extrapolate) {
    const RadialField full = step(v, ds, cfg);
    const RadialField half = step(step(v, 0.5 * ds, cfg), 0.5 * ds, cfg);
    out.resize(v.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = 2.0 * half[i] - full[i];
    out.back() = cfg.epsilon;
    require_positive(RadialField(v.grid_ptr(), out));
    clip_rounding(out, vmax);
    for (double x : out)
      if (x > vmax) throw SolverError(SolverError::Kind::positivity_lost, "extrapolated step overshoots");
  } else {
    const RadialField next = step(v, ds, cfg);
    out.assign(next.values().begin(), next.values().end());
    clip_rounding(out, vmax);
  }
  return RadialField(v.grid_ptr(), std::move(out));
}

struct Recorder {
  SolutionTrace& trace;
  std::vector<double> cumulative;  // per p, integrated at every accepted step
  std::vector<double> last_dissipation;

  void init(const RadialField& v) {
    cumulative.assign(trace.lp.size(), 0.0);
    last_dissipation.resize(trace.lp.size());
    for (std::size_t k = 0; k < trace.lp.size(); ++k)
      last_dissipation[k] = dissipation(v, trace.lp[k].p);
  }

  void accumulate(const RadialField& v, double ds) {
    for (std::size_t k = 0; k < trace.lp.size(); ++k) {
      const double d = dissipation(v, trace.lp[k].p);
      cumulative[k] += 0.5 * ds * (last_dissipation[k] + d);
      last_dissipation[k] = d;
    }
  }

  void record(double s, const RadialField& v) {
    trace.s.push_back(s);
    trace.mass.push_back(integrate(v));
    trace.K.push_back(dirichlet_energy(v));
    trace.sup.push_back(v.max());
    trace.center.push_back(v[0]);
    for (std::size_t k = 0; k < trace.lp.size(); ++k) {
      auto& ps = trace.lp[k];
      ps.integral.push_back(lp_integral(v, ps.p));
      ps.dissipation.push_back(last_dissipation[k]);
      ps.cumulative.push_back(cumulative[k]);
    }
  }
};

}  // namespace

RadialField step(const RadialField& v, double ds, const SolverConfig& cfg) {
  if (!(ds >= 0.0)) throw std::invalid_argument("step: ds must be nonnegative");
  if (ds == 0.0) return v;
  RadialField next = cfg.scheme == Scheme::explicit_euler ? explicit_step(v, ds, cfg.epsilon)
                                                          : implicit_step(v, ds, cfg.epsilon);
  require_positive(next);
  return next;
}

double half_radius(const RadialField& v) {
  const auto r = v.grid().radii();
  const double level = 0.5 * v[0];
  for (std::size_t i = 1; i < v.size(); ++i) {
    if (v[i] <= level) {
      const double theta = (v[i - 1] - level) / (v[i - 1] - v[i]);
      return r[i - 1] + theta * (r[i] - r[i - 1]);
    }
  }
  return r.back();
}

double cfl_timestep(const RadialField& v, const SolverConfig& cfg, double ds_prev) {
  const double vmax = v.max();
  if (!(vmax > 0.0) || !std::isfinite(vmax))
    throw std::domain_error("cfl_timestep: max(v) must be positive and finite");
  double ds;
  if (cfg.scheme == Scheme::explicit_euler) {
    const double h = v.grid().min_spacing();
    ds = cfg.cfl_safety * h * h / (2.0 * v.grid().dim() * vmax);
  } else {
    const double rh = half_radius(v);
    ds = cfg.cfl_safety * rh * rh / vmax;
    if (ds_prev > 0.0) ds = std::min(ds, cfg.growth * ds_prev);
    else ds = std::min(ds, cfg.ds_init);
  }
  return std::clamp(ds, cfg.ds_init, cfg.ds_max);
}

SolutionTrace solve(const RadialField& v0, const SolverConfig& cfg_in, const StepObserver& observer) {
  SolverConfig cfg = cfg_in;
  cfg.validate();
  require_positive(v0);
  if (v0[v0.size() - 1] < cfg.epsilon * (1.0 - 1e-12))
    throw std::invalid_argument("solve: boundary value of v0 below epsilon");
  if (std::find(cfg.p_list.begin(), cfg.p_list.end(), 1.0) == cfg.p_list.end())
    cfg.p_list.insert(cfg.p_list.begin(), 1.0);

  SolutionTrace trace;
  trace.v0_max = v0.max();
  trace.epsilon = cfg.epsilon;
  for (double p : cfg.p_list) trace.lp.push_back(PSeries{p, {}, {}, {}});

  const double ceiling = trace.v0_max;
  Recorder rec{trace, {}, {}};
  rec.init(v0);
  rec.record(0.0, v0);

  std::size_t next_snap = 0;
  while (next_snap < cfg.snapshot_times.size() && cfg.snapshot_times[next_snap] <= 0.0) {
    trace.snapshots.push_back({0.0, v0});
    ++next_snap;
  }

  RadialField v = v0;
  double s = 0.0;
  double H = 0.0;
  double mass = trace.mass[0];
  double ds_prev = 0.0;
  const double collapse = cfg.ds_init * 1e-6;

  for (std::size_t n = 0; n < cfg.max_steps; ++n) {
    if (s >= cfg.s_end) break;
    if (cfg.t_target > 0.0 && H >= cfg.t_target) break;

    const double proposed = cfl_timestep(v, cfg, ds_prev);
    double ds = proposed;
    bool landing = false;
    const double stop = next_snap < cfg.snapshot_times.size()
                            ? std::min(cfg.snapshot_times[next_snap], cfg.s_end)
                            : cfg.s_end;
    if (s + ds >= stop) {
      ds = stop - s;
      landing = true;
    }

    RadialField next(v.grid_ptr());
    for (int halvings = 0;; ++halvings) {
      try {
        next = advance(v, ds, cfg);
        break;
      } catch (const SolverError& e) {
        if (e.kind() == SolverError::Kind::max_principle) throw;
        ++trace.rejected_steps;
        ds *= 0.5;
        landing = false;
        if (halvings + 1 >= cfg.max_halvings || ds < collapse)
          throw SolverError(SolverError::Kind::step_collapse,
                            std::string("step collapse: ") + e.what());
      }
    }
    for (double x : next.values())
      if (!(x > 0.0) || x > ceiling)
        throw SolverError(SolverError::Kind::max_principle, "discrete maximum principle violated");

    const double s_next = landing ? stop : s + ds;
    rec.accumulate(next, s_next - s);
    const double mass_next = integrate(next);
    H += 0.5 * (s_next - s) * (mass + mass_next);
    mass = mass_next;
    ++trace.accepted_steps;

    if (observer) observer(StepView{s, v, s_next, next});

    const bool at_snap = landing && next_snap < cfg.snapshot_times.size() &&
                         s_next == cfg.snapshot_times[next_snap];
    const bool finished = s_next >= cfg.s_end || (cfg.t_target > 0.0 && H >= cfg.t_target);
    if (trace.accepted_steps % cfg.record_stride == 0 || at_snap || finished)
      rec.record(s_next, next);
    while (next_snap < cfg.snapshot_times.size() && cfg.snapshot_times[next_snap] <= s_next) {
      trace.snapshots.push_back({s_next, next});
      ++next_snap;
    }

    ds_prev = landing ? std::max(proposed, s_next - s) : ds;
    s = s_next;
    v = std::move(next);
  }
  return trace;
}

EpsilonContinuation epsilon_continuation(const RadialField& base, const SolverConfig& cfg,
                                         const std::vector<double>& eps_list) {
  if (eps_list.size() < 2)
    throw std::invalid_argument("epsilon_continuation: need at least two values");
  for (std::size_t k = 1; k < eps_list.size(); ++k)
    if (eps_list[k] > eps_list[k - 1])
      throw std::invalid_argument("epsilon_continuation: list must be decreasing");
  if (cfg.snapshot_times.empty())
    throw std::invalid_argument("epsilon_continuation: snapshot_times required");

  EpsilonContinuation out;
  out.eps = eps_list;
  const double h = base.grid().min_spacing();
  double hmax = 0.0;
  const auto r = base.grid().radii();
  for (std::size_t i = 1; i < r.size(); ++i) hmax = std::max(hmax, r[i] - r[i - 1]);
  const double slack = 10.0 * std::max(h, hmax) * std::max(h, hmax);

  for (double eps : eps_list) {
    SolverConfig c = cfg;
    c.epsilon = eps;
    std::vector<double> v(base.values().begin(), base.values().end());
    for (double& x : v) x += eps;
    out.runs.push_back(solve(RadialField(base.grid_ptr(), std::move(v)), c));
  }
  for (std::size_t k = 1; k < out.runs.size(); ++k) {
    const auto& a = out.runs[k - 1].snapshots;
    const auto& b = out.runs[k].snapshots;
    double inc = 0.0;
    for (std::size_t j = 0; j < std::min(a.size(), b.size()); ++j) {
      for (std::size_t i = 0; i < a[j].v.size(); ++i) {
        const double d = b[j].v[i] - a[j].v[i];
        out.worst_violation = std::max(out.worst_violation, d);
        inc = std::max(inc, std::abs(d));
      }
    }
    out.increments.push_back(inc);
  }
  out.monotone = out.worst_violation <= slack;
  out.regularization_error = out.increments.back();
  return out;
}

DomainContinuation domain_continuation(const DecayFamily& family, int dim, double dr,
                                       const SolverConfig& cfg, const std::vector<double>& radii,
                                       double eps_abs) {
  if (radii.empty()) throw std::invalid_argument("domain_continuation: empty radius list");
  for (std::size_t k = 1; k < radii.size(); ++k)
    if (radii[k] < radii[k - 1])
      throw std::invalid_argument("domain_continuation: radii must be increasing");
  if (cfg.snapshot_times.empty())
    throw std::invalid_argument("domain_continuation: snapshot_times required");
  validate(family, dim);

  auto make_grid = [&](double R) {
    const auto m = static_cast<std::size_t>(std::llround(R / dr));
    return std::make_shared<const RadialGrid>(RadialGrid::build(dim, R, m));
  };
  const GridPtr largest = make_grid(radii.back());
  const double amplitude = normalize_unit_mass(sample(family, largest)).scale;

  DomainContinuation out;
  out.radii = radii;
  for (double R : radii) {
    const GridPtr grid = make_grid(R);
    const double wall = profile(family, R);
    RadialField v0 = sample(grid, [&](double r) { return amplitude * (profile(family, r) - wall) + eps_abs; });
    SolverConfig c = cfg;
    c.epsilon = eps_abs;
    out.runs.push_back(solve(v0, c));
    out.tail_mass.push_back(amplitude * tail_mass(family, dim, R));
  }

  const double slack = 10.0 * dr * dr;
  for (std::size_t k = 1; k < out.runs.size(); ++k) {
    const auto& small = out.runs[k - 1].snapshots;
    const auto& big = out.runs[k].snapshots;
    for (std::size_t j = 0; j < std::min(small.size(), big.size()); ++j) {
      const auto r = small[j].v.grid().radii();
      for (std::size_t i = 0; i < r.size(); ++i) {
        const double d = small[j].v[i] - interpolate_at(big[j].v, r[i]);
        out.worst_violation = std::max(out.worst_violation, d);
      }
    }
    const double m_small = small.empty() ? 0.0 : integrate(small.back().v);
    const double m_big = big.empty() ? 0.0 : integrate(big.back().v);
    out.increments.push_back(m_big - m_small);
  }
  out.monotone = out.worst_violation <= slack;
  return out;
}

}  // namespace rpde
