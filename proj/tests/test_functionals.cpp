#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "rpde/functionals.hpp"
#include "rpde/initial_data.hpp"

using namespace rpde;
using doctest::Approx;

namespace {

GridPtr grid(int n, double R, std::size_t M, Grading g = Grading::uniform, double q = 1.0) {
  return std::make_shared<const RadialGrid>(RadialGrid::build(n, R, M, g, q));
}

SolutionTrace separable_run(std::size_t M, double cfl) {
  const auto g = grid(1, 1.0, M);
  const auto phi = exact_phi(g);
  std::vector<double> v(phi.size());
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = phi[i] + 1e-12;
  SolverConfig c;
  c.epsilon = 1e-12;
  c.scheme = Scheme::explicit_euler;
  c.cfl_safety = cfl;
  c.s_end = 1.0;
  c.p_list = {0.5, 1.0, 2.0};
  return solve(RadialField(g, std::move(v)), c);
}

}  // namespace

TEST_CASE("identity residual") {
  SUBCASE("steady trace has zero residual") {
    SolverConfig c;
    c.epsilon = 1e-3;
    c.s_end = 1.0;
    const auto trace = solve(RadialField(grid(2, 1.0, 16), 1e-3), c);
    const auto r = lp_identity_residual(trace, 1.0);
    CHECK(r.worst_rel < 1e-14);
    CHECK(r.n_samples == trace.size());
    CHECK(r.series.size() == trace.size());
  }
  SUBCASE("missing series") {
    const auto trace = separable_run(16, 0.5);
    CHECK_THROWS_AS(lp_identity_residual(trace, 3.0), std::invalid_argument);
    CHECK_THROWS_AS(lp_identity_residual(SolutionTrace{}, 1.0), std::invalid_argument);
  }
  SUBCASE("p = 2 residual converges at second order on the separable solution") {
    const double r1 = lp_identity_residual(separable_run(16, 0.5), 2.0).worst_rel;
    const double r2 = lp_identity_residual(separable_run(32, 0.5), 2.0).worst_rel;
    const double r3 = lp_identity_residual(separable_run(64, 0.5), 2.0).worst_rel;
    CHECK(std::log2(r1 / r2) == Approx(2.0).epsilon(0.15));
    CHECK(std::log2(r2 / r3) == Approx(2.0).epsilon(0.15));
  }
  SUBCASE("json") {
    const auto j = to_json(lp_identity_residual(separable_run(16, 0.5), 1.0));
    CHECK(j.contains("p"));
    CHECK(j.contains("worst_abs"));
    CHECK(j.contains("worst_rel"));
    CHECK(j.contains("n_samples"));
    CHECK(j.size() == 4);
  }
}

TEST_CASE("energy inequality") {
  const auto zero = energy_inequality_check(RadialField(grid(1, 1.0, 10), 0.0));
  CHECK(zero.lhs == 0.0);
  CHECK(zero.rhs == 0.0);
  CHECK(zero.ok);

  // φ_R normalized to unit mass: (∫|∇φ|²)² ≤ ∫ φ |Δφ|²
  for (int n = 1; n <= 3; ++n) {
    const auto g = grid(n, 1.0, 200);
    const auto u = normalize_unit_mass(exact_phi(g)).field;
    const auto r = energy_inequality_check(u);
    CHECK(r.ok);
    // Δu is constant, so Cauchy-Schwarz is an equality here
    CHECK(r.lhs == Approx(r.rhs).epsilon(1e-6));
    // and the right side is scale² · mass = scale²
    const double scale = 1.0 / integrate(exact_phi(g));
    CHECK(r.rhs == Approx(scale * scale).epsilon(1e-6));
  }

  // a fast-decaying Gaussian snapshot far below unit mass
  const auto g = grid(3, 10.0, 400);
  const auto gauss = sample(g, [](double r) { return 1e-3 * std::exp(-r * r); });
  CHECK(energy_inequality_check(gauss).ok);

  CHECK_THROWS_AS(energy_inequality_check(RadialField(grid(1, 1.0, 10), 5.0)), std::domain_error);
}

TEST_CASE("energy monotonicity") {
  std::vector<double> t, L;
  for (int i = 0; i < 100; ++i) {
    t.push_back(std::pow(10.0, -2.0 + 0.05 * i));
    L.push_back(1.0 / (1.0 + t.back()));
  }
  auto clean = energy_monotonicity_check(t, L);
  CHECK(clean.violations == 0);
  CHECK(clean.max_uptick == 0.0);
  CHECK(clean.decay_checked);
  CHECK(clean.decays);

  L[50] = L[49] * (1.0 + 1e-3);
  auto bumped = energy_monotonicity_check(t, L);
  CHECK(bumped.violations == 1);
  CHECK(bumped.max_uptick == Approx(1e-3).epsilon(1e-6));

  // flat series over a short span: no decay check
  std::vector<double> ts{1, 2, 3, 4}, Ls{1, 1, 1, 1};
  auto flat = energy_monotonicity_check(ts, Ls);
  CHECK(flat.violations == 0);
  CHECK_FALSE(flat.decay_checked);

  CHECK_THROWS(energy_monotonicity_check(std::vector<double>{1, 2}, std::vector<double>{1}));
}
