#pragma once

#include <functional>
#include <string>
#include <variant>

#include "rpde/radial_core.hpp"

namespace rpde {

/// c0 (1 + r)^{-γ}
struct Algebraic {
  double c0 = 1.0;
  double gamma = 4.0;
};

/// c0 exp(-α r^β)
struct Exponential {
  double c0 = 1.0;
  double alpha = 1.0;
  double beta = 1.0;
};

/// c0 exp(-α exp(r^β))
struct DoublyExponential {
  double c0 = 1.0;
  double alpha = 1.0;
  double beta = 1.0;
};

struct Custom {
  std::function<double(double)> profile;
  std::string name = "custom";
};

using DecayFamily = std::variant<Algebraic, Exponential, DoublyExponential, Custom>;

/// Radial profile value at r >= 0.
double profile(const DecayFamily& family, double r);

/// Checks positivity of parameters and, for Algebraic, γ > n. Throws
/// std::invalid_argument with a message naming the violated constraint.
void validate(const DecayFamily& family, int dim);

RadialField sample(const DecayFamily& family, const GridPtr& grid);

struct Normalized {
  RadialField field;
  double scale;  ///< factor applied: field = scale * input
};

/// Rescales to ∫f = 1 on the discrete grid. Throws std::domain_error when the
/// discrete mass is not positive.
Normalized normalize_unit_mass(const RadialField& f);

/// Whether the profile lies in L^p(R^n): Algebraic iff pγ > n, the
/// exponential families always.
bool check_integrability(const DecayFamily& family, int dim, double p);

/// Mass of the profile outside B_R (exact for Algebraic; quadrature otherwise).
double tail_mass(const DecayFamily& family, int dim, double radius);

/// Initial data for the ε-regularized Dirichlet problem on B_R:
/// v0 = scale · (profile - profile(R) + eps_rel · profile(0)), scaled to unit
/// discrete mass. The boundary value of v0 is the Dirichlet value ε.
struct RegularizedData {
  RadialField v0;
  double epsilon;
  double scale;
};
RegularizedData regularized_unit_mass_data(const DecayFamily& family, const GridPtr& grid,
                                           double eps_rel);

/// `kind:name=value,...` with kind in {algebraic, exponential, doubly_exponential}.
///
///   family = kind ":" param { "," param } ;
///   kind   = "algebraic" | "exponential" | "doubly_exponential" ;
///   param  = ("c0" | "gamma" | "alpha" | "beta") "=" number ;
///
/// Omitted parameters take the struct defaults. Throws std::invalid_argument.
DecayFamily parse_family(const std::string& text);
std::string to_string(const DecayFamily& family);

}  // namespace rpde
