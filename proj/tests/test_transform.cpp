#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <sstream>

#include "rpde/initial_data.hpp"
#include "rpde/transform.hpp"

using namespace rpde;
using doctest::Approx;

namespace {

// Trace with prescribed mass m(s) and energy K(s); the p = 1 series is
// consistent when ∫_0^s K = 1 - m(s).
template <class Mass, class Energy>
SolutionTrace synthetic(const std::vector<double>& s, Mass mass, Energy energy) {
  SolutionTrace tr;
  tr.lp.push_back(PSeries{1.0, {}, {}, {}});
  for (double x : s) {
    tr.s.push_back(x);
    tr.mass.push_back(mass(x));
    tr.K.push_back(energy(x));
    tr.sup.push_back(1.0);
    tr.center.push_back(1.0);
    tr.lp[0].integral.push_back(mass(x));
    tr.lp[0].dissipation.push_back(energy(x));
    tr.lp[0].cumulative.push_back(1.0 - mass(x));
  }
  tr.v0_max = 1.0;
  return tr;
}

// m = 1/(1+s), K = m²: H = ln(1+s), h = e^t - 1, g = e^t, E = t, L = 1.
SolutionTrace hyperbolic(double s_end, std::size_t n) {
  std::vector<double> s;
  for (std::size_t i = 0; i < n; ++i) s.push_back(std::expm1(std::log1p(s_end) * i / (n - 1)));
  s.back() = s_end;
  return synthetic(
      s, [](double x) { return 1.0 / (1.0 + x); }, [](double x) { return 1.0 / ((1.0 + x) * (1.0 + x)); });
}

SolutionTrace linear_mass() {
  std::vector<double> s;
  for (int i = 0; i <= 10; ++i) s.push_back(0.1 * i);
  return synthetic(
      s, [](double x) { return 1.0 - 0.5 * x; }, [](double) { return 0.5; });
}

}  // namespace

TEST_CASE("t-grid nodes") {
  const TGridSpec spec{5, 1e-2, 1e2};
  const auto t = spec.nodes();
  REQUIRE(t.size() == 6);
  CHECK(t[0] == 0.0);
  CHECK(t[1] == Approx(1e-2));
  CHECK(t[3] == Approx(1.0));
  CHECK(t[5] == 1e2);
  CHECK_THROWS_AS((TGridSpec{1, 1e-2, 1.0}).validate(), std::invalid_argument);
  CHECK_THROWS_AS((TGridSpec{10, 0.0, 1.0}).validate(), std::invalid_argument);
  CHECK_THROWS_AS((TGridSpec{10, 2.0, 1.0}).validate(), std::invalid_argument);
}

TEST_CASE("linear mass: exact quadratic H and its inverse") {
  const auto tab = build_tables(linear_mass(), TGridSpec{20, 1e-2, 0.4});
  CHECK(tab.H_at(0.5) == Approx(0.4375).epsilon(1e-15));
  CHECK(tab.h_at(0.4375) == Approx(0.5).epsilon(1e-14));
  CHECK(tab.attained_t_max == Approx(0.75).epsilon(1e-15));
  CHECK_FALSE(tab.truncated);
  for (double s : {0.03, 0.31, 0.77, 0.99}) CHECK(tab.h_at(tab.H_at(s)) == Approx(s).epsilon(1e-13));
  CHECK_THROWS_AS(tab.h_at(0.8), TransformError);
  CHECK_THROWS_AS(tab.h_at(-0.1), TransformError);
  // g = 1/m(h), L = K g²
  for (std::size_t i = 0; i < tab.t_nodes.size(); ++i) {
    const double m = 1.0 - 0.5 * tab.h[i];
    CHECK(tab.g[i] == Approx(1.0 / m).epsilon(1e-13));
    CHECK(tab.L[i] == Approx(0.5 / (m * m)).epsilon(1e-13));
    CHECK(tab.E[i] == Approx(-std::log(m)).epsilon(1e-13));
  }
}

TEST_CASE("hyperbolic mass: the time change is the exponential") {
  const auto tab = build_tables(hyperbolic(std::expm1(6.0), 4001), TGridSpec{200, 1e-2, 5.0});
  REQUIRE(tab.t_nodes.size() == 201);
  CHECK(tab.t_nodes[0] == 0.0);
  CHECK(tab.E[0] == 0.0);
  CHECK(tab.g[0] == 1.0);
  for (std::size_t i = 1; i < tab.t_nodes.size(); ++i) {
    const double t = tab.t_nodes[i];
    CHECK(tab.h[i] == Approx(std::expm1(t)).epsilon(1e-5));
    CHECK(tab.g[i] == Approx(std::exp(t)).epsilon(1e-5));
    CHECK(std::abs(tab.E[i] - t) <= 1e-5);
    CHECK(tab.L[i] == Approx(1.0).epsilon(1e-5));
  }
  CHECK(energy_E(tab, std::log(2.0)) == Approx(std::log(2.0)).epsilon(1e-5));
  CHECK(energy_E(tab, 0.0) == 0.0);
  CHECK_THROWS_AS(energy_E(tab, 6.0), TransformError);

  const auto d = check_identities(tab);
  CHECK(d.inverse_error <= 1e-6);
  CHECK(d.h_prime_vs_g <= 1e-2);
  CHECK(d.g_prime_vs_gL <= 5e-2);
  CHECK(d.energy_integral_gap <= 1e-2);
  CHECK(d.h_prime_nondecreasing);
}

TEST_CASE("truncation at the attained horizon") {
  const auto tab = build_tables(hyperbolic(std::expm1(2.0), 401), TGridSpec{50, 1e-2, 10.0});
  CHECK(tab.truncated);
  CHECK(tab.attained_t_max == Approx(2.0).epsilon(1e-4));
  CHECK(tab.t_nodes.back() <= tab.attained_t_max);
  REQUIRE(tab.warnings.size() == 1);
  CHECK(tab.warnings[0].find("truncated") != std::string::npos);
}

TEST_CASE("transform errors") {
  auto kind_of = [](const SolutionTrace& tr) {
    try {
      build_tables(tr, TGridSpec{});
    } catch (const TransformError& e) {
      return static_cast<int>(e.kind());
    }
    return -1;
  };
  auto half = linear_mass();
  for (double& m : half.mass) m *= 0.5;
  CHECK(kind_of(half) == static_cast<int>(TransformError::Kind::bad_initial_mass));

  auto zero = linear_mass();
  zero.mass[5] = 0.0;
  CHECK(kind_of(zero) == static_cast<int>(TransformError::Kind::non_positive_mass));

  auto drift = linear_mass();
  for (double& c : drift.lp[0].cumulative) c *= 1.5;
  CHECK(kind_of(drift) == static_cast<int>(TransformError::Kind::mass_energy_mismatch));
}

TEST_CASE("csv tables") {
  const auto tab = build_tables(linear_mass(), TGridSpec{5, 1e-2, 0.4});
  std::ostringstream t, s;
  write_t_table_csv(t, tab);
  write_s_table_csv(s, tab);
  CHECK(t.str().rfind("t,h,g,E,L\n", 0) == 0);
  CHECK(s.str().rfind("s,Hprime,H,G\n", 0) == 0);
  std::size_t rows = 0;
  for (char c : t.str()) rows += c == '\n';
  CHECK(rows == tab.t_nodes.size() + 1);
}

TEST_CASE("solved trace: sampler, reconstruction and energy") {
  const auto grid = std::make_shared<const RadialGrid>(RadialGrid::build(1, 200.0, 800, Grading::geometric, 1.005));
  const auto data = regularized_unit_mass_data(Algebraic{1.0, 4.0}, grid, 1e-10);
  const TGridSpec spec{60, 1e-2, 50.0};

  SolverConfig c;
  c.epsilon = data.epsilon;
  c.cfl_safety = 0.0125;
  c.s_end = 1e300;
  c.t_target = spec.t_max;
  c.p_list = {1.0};
  for (int k = 0; k <= 600; ++k) c.snapshot_times.push_back(1e-3 * std::pow(10.0, 12.0 * k / 600.0));
  TimeChangeSampler sampler(spec.nodes(), data.v0);
  const auto trace = solve(data.v0, c, sampler.observer());
  const auto tab = build_tables(trace, spec);
  const auto& samples = sampler.samples();
  REQUIRE(samples.size() == tab.t_nodes.size());

  // u(0) is the unit-mass datum
  CHECK(samples[0].t == 0.0);
  for (std::size_t i = 0; i < data.v0.size(); ++i) CHECK(samples[0].u[i] == Approx(data.v0[i]).epsilon(1e-12));
  CHECK(std::abs(energy_E(tab, 0.0)) <= 1e-12);

  double worst_mass = 0.0, worst_energy = 0.0, worst_assembled = 0.0;
  std::size_t assembled = 0;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const auto& smp = samples[i];
    CHECK(smp.t == tab.t_nodes[i]);
    CHECK(smp.s == Approx(tab.h[i]).epsilon(1e-12));
    CHECK(smp.g == Approx(tab.g[i]).epsilon(1e-12));
    worst_mass = std::max(worst_mass, std::abs(integrate(smp.u) - 1.0));
    worst_energy = std::max(worst_energy, std::abs(dirichlet_energy(smp.u) / tab.L[i] - 1.0));
    if (smp.s > c.snapshot_times.front() && smp.s < trace.snapshots.back().s) {
      const auto u = assemble_u(tab, trace, smp.t);
      ++assembled;
      worst_energy = std::max(worst_energy, std::abs(dirichlet_energy(u) / tab.L[i] - 1.0));
      double diff = 0.0;
      for (std::size_t r = 0; r < u.size(); ++r) diff = std::max(diff, std::abs(u[r] - smp.u[r]));
      worst_assembled = std::max(worst_assembled, diff / smp.u[0]);
    }
  }
  CHECK(worst_mass <= 1e-10);
  CHECK(worst_energy <= 1e-2);
  CHECK(worst_assembled <= 1e-2);
  CHECK(assembled >= 30);

  const auto d = check_identities(tab);
  CHECK(d.inverse_error <= 1e-6);
  CHECK(d.h_prime_vs_g <= 1e-2);
  CHECK(d.g_prime_vs_gL <= 5e-2);
  CHECK(d.energy_integral_gap <= 1e-2);
  CHECK(d.h_prime_nondecreasing);
  for (std::size_t i = 1; i < tab.E.size(); ++i) CHECK(tab.E[i] >= tab.E[i - 1]);
}
