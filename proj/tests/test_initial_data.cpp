#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "rpde/initial_data.hpp"

using namespace rpde;
using doctest::Approx;

namespace {

GridPtr grid(int n, double R, std::size_t M, Grading g = Grading::uniform, double q = 1.0) {
  return std::make_shared<const RadialGrid>(RadialGrid::build(n, R, M, g, q));
}

}  // namespace

TEST_CASE("profile values") {
  CHECK(profile(Algebraic{1.0, 4.0}, 0.0) == 1.0);
  CHECK(profile(Algebraic{1.0, 4.0}, 1.0) == Approx(0.0625));
  CHECK(profile(Exponential{2.0, 0.5, 1.0}, 2.0) == Approx(2.0 * std::exp(-1.0)));
  CHECK(profile(DoublyExponential{1.0, 1.0, 1.0}, 0.0) == Approx(std::exp(-1.0)));
  CHECK(profile(Custom{[](double r) { return 3.0 - r; }}, 1.0) == 2.0);
}

TEST_CASE("sampled profiles are positive and nonincreasing") {
  const auto g = grid(2, 6.0, 300);
  for (const DecayFamily& f : {DecayFamily{Algebraic{1.0, 3.0}}, DecayFamily{Exponential{1.0, 0.5, 2.0}},
                               DecayFamily{DoublyExponential{1.0, 1.0, 0.5}}}) {
    const auto v = sample(f, g);
    for (std::size_t i = 0; i < v.size(); ++i) {
      CHECK(v[i] > 0.0);
      if (i > 0) CHECK(v[i] <= v[i - 1]);
    }
  }
}

TEST_CASE("validation") {
  CHECK_NOTHROW(validate(Algebraic{1.0, 4.0}, 3));
  CHECK_THROWS_AS(validate(Algebraic{1.0, 2.0}, 2), std::invalid_argument);
  CHECK_THROWS_AS(validate(Algebraic{0.0, 4.0}, 1), std::invalid_argument);
  CHECK_THROWS_AS(validate(Exponential{1.0, -1.0, 1.0}, 1), std::invalid_argument);
  CHECK_THROWS_AS(validate(DoublyExponential{1.0, 1.0, 0.0}, 1), std::invalid_argument);
  CHECK_THROWS_AS(validate(Custom{}, 1), std::invalid_argument);
}

TEST_CASE("unit mass normalization") {
  const auto g = grid(1, 1.0, 50);
  const auto two = normalize_unit_mass(RadialField(g, 1.0));
  CHECK(integrate(two.field) == Approx(1.0).epsilon(1e-12));
  CHECK(two.scale == Approx(0.5));
  const auto again = normalize_unit_mass(two.field);
  CHECK(again.scale == Approx(1.0).epsilon(1e-12));
  CHECK_THROWS_AS(normalize_unit_mass(RadialField(g, 0.0)), std::domain_error);

  const auto alg = normalize_unit_mass(sample(Algebraic{1.0, 4.0}, grid(1, 100.0, 4000)));
  CHECK(1.0 / alg.scale == Approx(0.666666019606568).epsilon(1e-3));
  // trapezoid error is O(Δr²) against the closed-form mass
  const double e1 = std::abs(integrate(sample(Algebraic{1.0, 4.0}, grid(1, 100.0, 4000))) - 0.666666019606568);
  const double e2 = std::abs(integrate(sample(Algebraic{1.0, 4.0}, grid(1, 100.0, 8000))) - 0.666666019606568);
  CHECK(std::log2(e1 / e2) == Approx(2.0).epsilon(0.05));
  CHECK(integrate(alg.field) == Approx(1.0).epsilon(1e-12));
}

TEST_CASE("integrability") {
  CHECK(check_integrability(Algebraic{1.0, 4.0}, 1, 0.5));
  CHECK_FALSE(check_integrability(Algebraic{1.0, 1.5}, 1, 0.5));
  CHECK(check_integrability(Exponential{1.0, 1.0, 1.0}, 3, 0.1));
}

TEST_CASE("tail mass") {
  // 2 ∫_R^∞ (1 + r)^-4 = (2/3)(1 + R)^-3
  CHECK(tail_mass(Algebraic{1.0, 4.0}, 1, 100.0) * 1.5 * std::pow(101.0, 3) == Approx(1.0).epsilon(1e-12));
  // 4π ∫_R^∞ r² (1 + r)^-5 against quadrature
  const double closed = tail_mass(Algebraic{1.0, 5.0}, 3, 10.0);
  const double quad = tail_mass(Custom{[](double r) { return std::pow(1.0 + r, -5.0); }}, 3, 10.0);
  CHECK(closed / quad == Approx(1.0).epsilon(1e-9));
  // 2 ∫_R^∞ e^{-r} = 2 e^{-R}
  CHECK(tail_mass(Exponential{1.0, 1.0, 1.0}, 1, 5.0) / (2.0 * std::exp(-5.0)) == Approx(1.0).epsilon(1e-10));
}

TEST_CASE("regularized data") {
  const auto g = grid(1, 50.0, 500, Grading::geometric, 1.005);
  const auto d = regularized_unit_mass_data(Algebraic{1.0, 4.0}, g, 1e-10);
  CHECK(integrate(d.v0) == Approx(1.0).epsilon(1e-12));
  CHECK(d.epsilon == d.v0[d.v0.size() - 1]);
  CHECK(d.epsilon / d.v0[0] * 1e10 == Approx(1.0).epsilon(1e-6));
  CHECK(d.epsilon > 0.0);
  CHECK_THROWS_AS(regularized_unit_mass_data(Algebraic{}, g, 0.0), std::invalid_argument);
}

TEST_CASE("family strings") {
  const auto a = parse_family("algebraic:c0=2,gamma=3.5");
  REQUIRE(std::holds_alternative<Algebraic>(a));
  CHECK(std::get<Algebraic>(a).c0 == 2.0);
  CHECK(std::get<Algebraic>(a).gamma == 3.5);
  const auto e = parse_family("exponential:alpha=0.5,beta=2");
  CHECK(std::get<Exponential>(e).c0 == 1.0);
  CHECK(std::get<Exponential>(e).beta == 2.0);
  CHECK(std::holds_alternative<DoublyExponential>(parse_family("doubly_exponential:beta=1")));
  CHECK(to_string(parse_family(to_string(e))) == to_string(e));

  CHECK_THROWS_AS(parse_family("gaussian:c0=1"), std::invalid_argument);
  CHECK_THROWS_AS(parse_family("algebraic:delta=1"), std::invalid_argument);
  CHECK_THROWS_AS(parse_family("algebraic:gamma=x"), std::invalid_argument);
  CHECK_THROWS_AS(parse_family("algebraic:gamma"), std::invalid_argument);
}
