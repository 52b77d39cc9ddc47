#pragma once

#include <cstddef>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "json.hpp"

namespace rpde {

/// ℓ(ξ) = ξ^α
struct PowerEll {
  double alpha;
};
/// ℓ(ξ) = ln^α(ξ + 1)
struct LogPlusEll {
  double alpha;
};
/// ℓ(ξ) = ln^{-κ}(M/ξ) for ξ < M/2, constant beyond.
struct NegLogPowEll {
  double kappa;
  double M;
};
/// ℓ(ξ) = ln^{-κ}(ln(M/ξ)) for ξ < ξ₂, constant beyond. Needs ξ₂ < M/e.
struct IterLogEll {
  double kappa;
  double M;
  double xi2;
};

/// Decay gauge ℓ together with the space dimension that fixes the exponent
/// m = (n + 2)/n in ℒ(t) = ∫_1^t dξ / (ξ ℓ^m(1/ξ)).
struct EllFunction {
  std::variant<PowerEll, LogPlusEll, NegLogPowEll, IterLogEll> form;
  int dim = 1;

  double exponent() const { return (dim + 2.0) / dim; }
  /// Throws std::invalid_argument on inadmissible parameters.
  void validate() const;
  std::string describe() const;
};

double eval_ell(const EllFunction& f, double xi);

struct ConditionReport {
  bool monotone_tail = false;  ///< ξ ℓ^m(1/ξ) nondecreasing beyond xi0
  double xi0 = 0.0;
  bool divergent = false;      ///< ∫^∞ dξ/(ξ ℓ^m(1/ξ)) = ∞ (tail proxy)
  bool log_convex = false;     ///< ξℓ'' >= -ℓ' near zero
  bool scaling = false;        ///< ℓ(ξ) <= (1 + aλ) ℓ(ξ^{1+λ}) with finite a
  double a_needed = 0.0;
  bool zero_limit = false;     ///< ξℓ'(ξ)/ℓ(ξ) -> 0 as ξ -> 0

  nlohmann::json to_json() const;
};

ConditionReport check_conditions(const EllFunction& f);

/// ℒ(t) by adaptive Gauss-Kronrod in y = ln ξ. Requires t >= 1.
double compute_L(const EllFunction& f, double t);
/// ℒ⁻¹(y) for y > 0 by bracketing and safeguarded Newton in ln ξ.
double invert_L(const EllFunction& f, double y);
/// ln (ℒ⁻¹)'(C1 t) = ln ξ + m ln ℓ(1/ξ) with ξ = ℒ⁻¹(C1 t).
double predicted_E(const EllFunction& f, double C1, double t);

struct AlgebraicScenario {
  int dim = 1;
  double gamma = 4.0;
  double eps = 1.0;
};
struct ExponentialScenario {
  int dim = 1;
  double beta = 2.0;
  double eps = 0.25;
};
struct DoublyExponentialScenario {
  int dim = 1;
  double beta = 1.0;
  double eps = 0.25;
};
using Scenario = std::variant<AlgebraicScenario, ExponentialScenario, DoublyExponentialScenario>;

/// `algebraic:n=1,gamma=4,eps=1`, `exponential:n=1,beta=2,eps=0.25`,
/// `doubly_exponential:n=1,beta=1,eps=0.25`.
Scenario parse_scenario(const std::string& text);
std::string to_string(const Scenario& s);

enum class LawKind {
  log_slope,     ///< E ~ c ln t
  power,         ///< E ~ C t^c
  log_corrected  ///< E ~ C t ln^{-c} t
};

struct PredictedLaw {
  LawKind kind;
  double value;  ///< slope, exponent or power of the logarithm
  std::string basis;

  /// Law shape through (anchor_t, anchor_E): additive constant for log
  /// slopes, multiplicative prefactor otherwise.
  double evaluate(double t, double anchor_t, double anchor_E) const;
  nlohmann::json to_json() const;
};

struct LawPair {
  std::optional<PredictedLaw> upper;
  PredictedLaw lower;
};

LawPair closed_form_laws(const Scenario& s);

struct FitResult {
  double slope = 0.0;      ///< log slope or power exponent
  double intercept = 0.0;  ///< additive constant, or ln of the prefactor
  double stderr_slope = 0.0;
  double r2 = 0.0;
  std::size_t samples = 0;
  double t_lo = 0.0;
  double t_hi = 0.0;

  nlohmann::json to_json() const;
};

/// Least squares of E against ln t over t ∈ [t_lo, t_hi]; needs >= 10 samples.
FitResult fit_log_slope(std::span<const double> t, std::span<const double> E, double t_lo, double t_hi);
/// Least squares of ln E against ln t; E must be positive in the window.
FitResult fit_power(std::span<const double> t, std::span<const double> E, double t_lo, double t_hi);

/// `t,E_pred_upper,E_pred_lower`; a missing upper law is written as nan.
void write_predictions_csv(std::ostream& out, std::span<const double> t, const LawPair& laws,
                           double anchor_t, double anchor_E);

}  // namespace rpde
