#include "rpde/transform.hpp"

#include <algorithm>
#include <math.h>  // pchip in Boost 1.74 calls unqualified isnan

#include <boost/math/interpolators/pchip.hpp>
#include <cmath>
#include <cstdio>
#include <ostream>

namespace rpde {

namespace {

// Offset x in [0, dx] with m_a x + (m_b - m_a) x² / (2 dx) = dH.
double invert_segment(double dH, double dx, double m_a, double m_b) {
  if (dH <= 0.0) return 0.0;
  const double a = (m_b - m_a) / (2.0 * dx);
  const double disc = m_a * m_a + 4.0 * a * dH;
  double x = disc >= 0.0 ? 2.0 * dH / (m_a + std::sqrt(disc)) : std::nan("");
  if (!std::isfinite(x) || x < 0.0 || x > dx * (1.0 + 1e-12)) {
    double lo = 0.0, hi = dx;
    for (int k = 0; k < 200 && hi - lo > 1e-15 * dx; ++k) {
      const double mid = 0.5 * (lo + hi);
      (m_a * mid + a * mid * mid < dH ? lo : hi) = mid;
    }
    x = 0.5 * (lo + hi);
  }
  return std::clamp(x, 0.0, dx);
}

// Segment index j with nodes[j] <= x <= nodes[j+1].
std::size_t segment_of(const std::vector<double>& nodes, double x) {
  const auto it = std::upper_bound(nodes.begin(), nodes.end(), x);
  std::size_t j = static_cast<std::size_t>(it - nodes.begin());
  j = j == 0 ? 0 : j - 1;
  return std::min(j, nodes.size() - 2);
}

// Three-point derivative on a nonuniform grid at interior node i.
double central_derivative(const std::vector<double>& t, const std::vector<double>& f, std::size_t i) {
  const double hl = t[i] - t[i - 1], hr = t[i + 1] - t[i];
  return ((f[i + 1] - f[i]) * hl / hr + (f[i] - f[i - 1]) * hr / hl) / (hl + hr);
}

void print_row(std::ostream& out, std::initializer_list<double> xs) {
  char buf[40];
  bool first = true;
  for (double x : xs) {
    std::snprintf(buf, sizeof buf, first ? "%.17g" : ",%.17g", x);
    out << buf;
    first = false;
  }
  out << '\n';
}

}  // namespace

void TGridSpec::validate() const {
  if (count < 2) throw std::invalid_argument("t-grid: need at least two points");
  if (!(t_min > 0.0) || !(t_max > t_min))
    throw std::invalid_argument("t-grid: need 0 < t_min < t_max");
}

std::vector<double> TGridSpec::nodes() const {
  validate();
  std::vector<double> t{0.0};
  const double a = std::log(t_min), b = std::log(t_max);
  for (std::size_t k = 0; k < count; ++k)
    t.push_back(k + 1 == count ? t_max : std::exp(a + (b - a) * k / (count - 1)));
  return t;
}

double TransformTables::H_at(double s) const {
  if (s <= s_nodes.front()) return 0.0;
  if (s >= s_nodes.back()) return H.back();
  const std::size_t j = segment_of(s_nodes, s);
  const double dx = s_nodes[j + 1] - s_nodes[j];
  const double x = s - s_nodes[j];
  return H[j] + Hprime[j] * x + (Hprime[j + 1] - Hprime[j]) * x * x / (2.0 * dx);
}

double TransformTables::h_at(double t) const {
  if (t < 0.0 || t > H.back() * (1.0 + 1e-14))
    throw TransformError(TransformError::Kind::out_of_coverage, "h: t outside attained range");
  if (t == 0.0) return 0.0;
  const std::size_t j = segment_of(H, t);
  const double dx = s_nodes[j + 1] - s_nodes[j];
  return s_nodes[j] + invert_segment(t - H[j], dx, Hprime[j], Hprime[j + 1]);
}

TransformTables build_tables(const SolutionTrace& trace, const TGridSpec& spec, double max_mismatch) {
  if (trace.size() < 2) throw std::invalid_argument("transform: trace needs at least two samples");
  if (std::abs(trace.mass.front() - 1.0) > 1e-3)
    throw TransformError(TransformError::Kind::bad_initial_mass, "transform: initial mass is not 1");
  for (double m : trace.mass)
    if (!(m > 0.0)) throw TransformError(TransformError::Kind::non_positive_mass, "transform: mass <= 0");

  TransformTables tab;
  tab.mass_balance = lp_identity_residual(trace, 1.0);
  if (tab.mass_balance.worst_rel > max_mismatch)
    throw TransformError(TransformError::Kind::mass_energy_mismatch,
                         "transform: mass and energy disagree (relative residual " +
                             std::to_string(tab.mass_balance.worst_rel) + ")");

  const std::size_t n = trace.size();
  const PSeries* unit = trace.series_for(1.0);
  tab.s_nodes = trace.s;
  tab.Hprime = trace.mass;
  tab.K = trace.K;
  tab.Hprime_energy.resize(n);
  tab.H.assign(n, 0.0);
  tab.G.resize(n);
  for (std::size_t j = 0; j < n; ++j) {
    tab.Hprime_energy[j] = 1.0 - unit->cumulative[j];
    tab.G[j] = 1.0 / tab.Hprime[j];
    if (j > 0)
      tab.H[j] = tab.H[j - 1] + 0.5 * (trace.s[j] - trace.s[j - 1]) * (trace.mass[j - 1] + trace.mass[j]);
  }
  tab.attained_t_max = tab.H.back();

  for (double t : spec.nodes()) {
    if (t > tab.attained_t_max) {
      tab.truncated = true;
      break;
    }
    const double s = tab.h_at(t);
    const std::size_t j = segment_of(tab.s_nodes, s);
    const double theta = (s - tab.s_nodes[j]) / (tab.s_nodes[j + 1] - tab.s_nodes[j]);
    const double m = (1.0 - theta) * tab.Hprime[j] + theta * tab.Hprime[j + 1];
    const double k = (1.0 - theta) * tab.K[j] + theta * tab.K[j + 1];
    const double root = std::sqrt(k) / m;
    tab.t_nodes.push_back(t);
    tab.h.push_back(s);
    tab.g.push_back(1.0 / m);
    tab.E.push_back(-std::log(m));
    tab.L.push_back(root * root);
  }
  if (tab.truncated) {
    char buf[160];
    std::snprintf(buf, sizeof buf, "t-grid truncated: requested t_max %.6g, attained %.6g",
                  spec.t_max, tab.attained_t_max);
    tab.warnings.emplace_back(buf);
  }
  return tab;
}

TimeChangeSampler::TimeChangeSampler(std::vector<double> t_targets, const RadialField& v0)
    : targets_(std::move(t_targets)), mass_(integrate(v0)) {
  if (!std::is_sorted(targets_.begin(), targets_.end()))
    throw std::invalid_argument("sampler: targets must be sorted");
  while (next_ < targets_.size() && targets_[next_] <= 0.0) {
    std::vector<double> u(v0.values().begin(), v0.values().end());
    for (double& x : u) x /= mass_;
    samples_.push_back({targets_[next_], 0.0, 1.0 / mass_, RadialField(v0.grid_ptr(), std::move(u))});
    ++next_;
  }
}

void TimeChangeSampler::operator()(const StepView& step) {
  const double m_b = integrate(step.v_next);
  const double dx = step.s_next - step.s_prev;
  const double H_b = H_ + 0.5 * dx * (mass_ + m_b);
  while (next_ < targets_.size() && targets_[next_] <= H_b) {
    const double x = invert_segment(targets_[next_] - H_, dx, mass_, m_b);
    const double theta = x / dx;
    const double m = (1.0 - theta) * mass_ + theta * m_b;
    std::vector<double> u(step.v_next.size());
    for (std::size_t i = 0; i < u.size(); ++i)
      u[i] = ((1.0 - theta) * step.v_prev[i] + theta * step.v_next[i]) / m;
    samples_.push_back({targets_[next_], step.s_prev + x, 1.0 / m,
                        RadialField(step.v_next.grid_ptr(), std::move(u))});
    ++next_;
  }
  H_ = H_b;
  mass_ = m_b;
}

StepObserver TimeChangeSampler::observer() {
  return [this](const StepView& step) { (*this)(step); };
}

RadialField assemble_u(const TransformTables& tables, const SolutionTrace& trace, double t) {
  const double s = tables.h_at(t);
  const auto& snaps = trace.snapshots;
  for (std::size_t k = 0; k < snaps.size(); ++k) {
    if (snaps[k].s == s || (k + 1 < snaps.size() && snaps[k].s < s && s < snaps[k + 1].s)) {
      const double theta = snaps[k].s == s ? 0.0 : (s - snaps[k].s) / (snaps[k + 1].s - snaps[k].s);
      const std::size_t j = segment_of(tables.s_nodes, s);
      const double w = (s - tables.s_nodes[j]) / (tables.s_nodes[j + 1] - tables.s_nodes[j]);
      const double m = (1.0 - w) * tables.Hprime[j] + w * tables.Hprime[j + 1];
      const RadialField& a = snaps[k].v;
      std::vector<double> u(a.size());
      for (std::size_t i = 0; i < u.size(); ++i) {
        const double b = theta > 0.0 ? snaps[k + 1].v[i] : a[i];
        u[i] = ((1.0 - theta) * a[i] + theta * b) / m;
      }
      return RadialField(a.grid_ptr(), std::move(u));
    }
  }
  throw TransformError(TransformError::Kind::out_of_coverage, "assemble_u: h(t) not bracketed by snapshots");
}

double energy_E(const TransformTables& tables, double t) {
  const auto& x = tables.t_nodes;
  if (x.empty() || t < 0.0 || t > x.back())
    throw TransformError(TransformError::Kind::out_of_coverage, "energy_E: t outside table");
  if (x.size() < 4) {
    const std::size_t j = segment_of(x, t);
    const double theta = (t - x[j]) / (x[j + 1] - x[j]);
    return (1.0 - theta) * tables.E[j] + theta * tables.E[j + 1];
  }
  using boost::math::interpolators::pchip;
  auto xs = x;
  auto ys = tables.E;
  const pchip<std::vector<double>> interp(std::move(xs), std::move(ys));
  return interp(t);
}

namespace {
double energy_rate(double K, double m) { return std::sqrt(K) * (std::sqrt(K) / m); }
}  // namespace

TransformDiagnostics check_identities(const TransformTables& tab) {
  TransformDiagnostics d;
  for (std::size_t j = 1; j < tab.s_nodes.size(); ++j) {
    const double s = tab.s_nodes[j];
    d.inverse_error = std::max(d.inverse_error, std::abs(tab.h_at(tab.H[j]) - s) / s);
  }

  const auto& t = tab.t_nodes;
  const std::size_t n = t.size();
  for (std::size_t i = 1; i + 1 < n; ++i) {
    const double hp = central_derivative(t, tab.h, i);
    d.h_prime_vs_g = std::max(d.h_prime_vs_g, std::abs(hp - tab.g[i]) / tab.g[i]);
    const double gp = central_derivative(t, tab.g, i);
    const double gl = tab.g[i] * tab.L[i];
    const double gap = std::abs(gp - gl);
    if (gl > 0.0) d.g_prime_vs_gL = std::max(d.g_prime_vs_gL, gap / gl);
    else if (gap > 0.0) d.g_prime_vs_gL = std::max(d.g_prime_vs_gL, gap);
  }

  // E(H(s)) = -ln m(s) against ∫_0^s K/m, i.e. ∫L dt pulled back to the fine s-trace
  double integral = 0.0;
  for (std::size_t j = 1; j < tab.s_nodes.size(); ++j) {
    integral += 0.5 * (tab.s_nodes[j] - tab.s_nodes[j - 1]) *
                (energy_rate(tab.K[j], tab.Hprime[j]) + energy_rate(tab.K[j - 1], tab.Hprime[j - 1]));
    const double E = -std::log(tab.Hprime[j]);
    d.energy_integral_gap = std::max(d.energy_integral_gap, std::abs(E - integral) / std::max(E, 1e-2));
  }
  for (std::size_t i = 1; i < n; ++i) {
    if (tab.g[i] < tab.g[i - 1] * (1.0 - 1e-12)) d.h_prime_nondecreasing = false;
  }

  if (n >= 2) {
    const double from = t.back() / 100.0;
    for (std::size_t i = 1; i < n; ++i) {
      if (t[i - 1] < from || t[i - 1] <= 0.0) continue;
      if (tab.E[i] / t[i] > tab.E[i - 1] / t[i - 1] * (1.0 + 1e-12)) d.E_over_t_decreasing = false;
    }
  }
  return d;
}

void write_t_table_csv(std::ostream& out, const TransformTables& tab) {
  out << "t,h,g,E,L\n";
  for (std::size_t i = 0; i < tab.t_nodes.size(); ++i)
    print_row(out, {tab.t_nodes[i], tab.h[i], tab.g[i], tab.E[i], tab.L[i]});
}

void write_s_table_csv(std::ostream& out, const TransformTables& tab) {
  out << "s,Hprime,H,G\n";
  for (std::size_t j = 0; j < tab.s_nodes.size(); ++j)
    print_row(out, {tab.s_nodes[j], tab.Hprime[j], tab.H[j], tab.G[j]});
}

}  // namespace rpde
