#include "rpde/asymptotics.hpp"

#include <algorithm>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/tools/roots.hpp>
#include <cmath>
#include <cstdio>
#include <limits>
#include <map>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <tuple>

namespace rpde {

namespace {

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

// Points y = ln ξ where 1/ℓ^m(e^{-y}) has a kink on y > 0.
std::vector<double> kinks(const EllFunction& f) {
  std::vector<double> out;
  if (const auto* it = std::get_if<IterLogEll>(&f.form))
    if (it->xi2 < 1.0) out.push_back(-std::log(it->xi2));
  if (const auto* nl = std::get_if<NegLogPowEll>(&f.form))
    if (nl->M < 2.0) out.push_back(-std::log(nl->M / 2.0));
  return out;
}

// Upper end of the region where ℓ is strictly increasing (caps excluded).
double increasing_limit(const EllFunction& f) {
  return std::visit(overloaded{
                        [](const PowerEll&) { return 1.0; },
                        [](const LogPlusEll&) { return 1.0; },
                        [](const NegLogPowEll& e) { return e.M / 2.0; },
                        [](const IterLogEll& e) { return e.xi2; },
                    },
                    f.form);
}

double ln_ell(const EllFunction& f, double y) { return std::log(eval_ell(f, std::exp(y))); }

// dℒ/d(ln ξ) at ln ξ = Y.
double integrand(const EllFunction& f, double Y) {
  return std::exp(-f.exponent() * ln_ell(f, -Y));
}

double L_of_log(const EllFunction& f, double Y) {
  using boost::math::quadrature::gauss_kronrod;
  if (Y <= 0.0) return 0.0;
  auto fn = [&](double y) { return integrand(f, y); };
  double total = 0.0, a = 0.0;
  auto split = kinks(f);
  split.push_back(Y);
  for (double b : split) {
    if (b <= a) continue;
    b = std::min(b, Y);
    total += gauss_kronrod<double, 61>::integrate(fn, a, b, 15, 1e-10);
    a = b;
    if (a >= Y) break;
  }
  return total;
}

struct LineFit {
  double slope, intercept, stderr_slope, r2;
};

LineFit least_squares(const std::vector<double>& x, const std::vector<double>& y) {
  const double n = static_cast<double>(x.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (!(sxx > 0.0)) throw std::invalid_argument("fit: abscissae are all equal");
  LineFit fit;
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  double ssr = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double r = y[i] - (fit.intercept + fit.slope * x[i]);
    ssr += r * r;
  }
  fit.r2 = syy > 0.0 ? 1.0 - ssr / syy : 1.0;
  fit.stderr_slope = x.size() > 2 ? std::sqrt(ssr / (n - 2.0) / sxx) : 0.0;
  return fit;
}

FitResult fit_window(std::span<const double> t, std::span<const double> E, double t_lo, double t_hi,
                     bool power) {
  if (t.size() != E.size()) throw std::invalid_argument("fit: size mismatch");
  std::vector<double> x, y;
  for (std::size_t i = 0; i < t.size(); ++i) {
    if (t[i] < t_lo || t[i] > t_hi || !(t[i] > 0.0)) continue;
    if (power && !(E[i] > 0.0)) throw std::domain_error("fit_power: non-positive E in window");
    x.push_back(std::log(t[i]));
    y.push_back(power ? std::log(E[i]) : E[i]);
  }
  if (x.size() < 10) throw std::invalid_argument("fit: fewer than 10 samples in window");
  const LineFit lf = least_squares(x, y);
  FitResult out;
  out.slope = lf.slope;
  out.intercept = lf.intercept;
  out.stderr_slope = lf.stderr_slope;
  out.r2 = lf.r2;
  out.samples = x.size();
  out.t_lo = std::exp(x.front());
  out.t_hi = std::exp(x.back());
  return out;
}

std::map<std::string, double> parse_params(const std::string& text, std::string& kind) {
  const auto colon = text.find(':');
  kind = text.substr(0, colon);
  std::map<std::string, double> params;
  if (colon == std::string::npos) return params;
  std::stringstream rest(text.substr(colon + 1));
  std::string item;
  while (std::getline(rest, item, ',')) {
    if (item.empty()) continue;
    const auto eq = item.find('=');
    if (eq == std::string::npos) throw std::invalid_argument("scenario: expected name=value in '" + item + "'");
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(item.substr(eq + 1), &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used == 0 || used != item.size() - eq - 1)
      throw std::invalid_argument("scenario: bad number in '" + item + "'");
    params[item.substr(0, eq)] = v;
  }
  return params;
}

}  // namespace

void EllFunction::validate() const {
  if (dim < 1) throw std::invalid_argument("ell: dimension must be >= 1");
  std::visit(overloaded{
                 [](const PowerEll& e) {
                   if (!(e.alpha > 0.0)) throw std::invalid_argument("ell: power needs alpha > 0");
                 },
                 [](const LogPlusEll& e) {
                   if (!(e.alpha > 0.0)) throw std::invalid_argument("ell: log-plus needs alpha > 0");
                 },
                 [](const NegLogPowEll& e) {
                   if (!(e.kappa > 0.0)) throw std::invalid_argument("ell: needs kappa > 0");
                   if (!(e.M >= 2.0)) throw std::invalid_argument("ell: needs M >= 2");
                 },
                 [](const IterLogEll& e) {
                   if (!(e.kappa > 0.0)) throw std::invalid_argument("ell: needs kappa > 0");
                   if (!(e.M > std::exp(1.0))) throw std::invalid_argument("ell: needs M > e");
                   if (!(e.xi2 > 0.0 && e.xi2 < e.M / std::exp(1.0)))
                     throw std::invalid_argument("ell: needs 0 < xi2 < M/e");
                 },
             },
             form);
}

std::string EllFunction::describe() const {
  std::ostringstream os;
  os.precision(10);
  std::visit(overloaded{
                 [&](const PowerEll& e) { os << "power(alpha=" << e.alpha; },
                 [&](const LogPlusEll& e) { os << "log_plus(alpha=" << e.alpha; },
                 [&](const NegLogPowEll& e) { os << "neg_log_pow(kappa=" << e.kappa << ",M=" << e.M; },
                 [&](const IterLogEll& e) {
                   os << "iter_log(kappa=" << e.kappa << ",M=" << e.M << ",xi2=" << e.xi2;
                 },
             },
             form);
  os << ",n=" << dim << ")";
  return os.str();
}

double eval_ell(const EllFunction& f, double xi) {
  if (!(xi >= 0.0)) throw std::domain_error("ell: xi must be nonnegative");
  if (xi == 0.0) return 0.0;
  return std::visit(overloaded{
                        [xi](const PowerEll& e) { return std::pow(xi, e.alpha); },
                        [xi](const LogPlusEll& e) { return std::pow(std::log1p(xi), e.alpha); },
                        [xi](const NegLogPowEll& e) {
                          const double x = std::min(xi, e.M / 2.0);
                          return std::pow(std::log(e.M / x), -e.kappa);
                        },
                        [xi](const IterLogEll& e) {
                          const double x = std::min(xi, e.xi2);
                          return std::pow(std::log(std::log(e.M / x)), -e.kappa);
                        },
                    },
                    f.form);
}

nlohmann::json ConditionReport::to_json() const {
  return {{"monotone_tail", monotone_tail}, {"xi0", xi0},          {"divergent", divergent},
          {"log_convex", log_convex},       {"scaling", scaling},  {"a_needed", a_needed},
          {"zero_limit", zero_limit}};
}

ConditionReport check_conditions(const EllFunction& f) {
  f.validate();
  ConditionReport rep;
  const double m = f.exponent();
  const double y_lo = std::log(1e-12), y_hi = std::log(1e12);

  // ln(ξ ℓ^m(1/ξ)) on a log grid; find the last decrease.
  {
    const int N = 2400;
    double prev = 0.0;
    std::size_t last_drop = 0;
    bool dropped = false;
    for (int k = 0; k <= N; ++k) {
      const double y = y_lo + (y_hi - y_lo) * k / N;
      const double val = y + m * ln_ell(f, -y);
      if (k > 0 && val < prev - 1e-10 * std::max(1.0, std::abs(prev))) {
        last_drop = static_cast<std::size_t>(k);
        dropped = true;
      }
      prev = val;
    }
    rep.xi0 = dropped ? std::exp(y_lo + (y_hi - y_lo) * last_drop / N) : 1e-12;
    rep.monotone_tail = rep.xi0 <= 1e9;
  }

  // Tail proxy: the y-integrand stays bounded below, so ℒ grows at least linearly in ln ξ.
  {
    double low = std::numeric_limits<double>::infinity();
    for (int k = 0; k <= 200; ++k) {
      const double y = std::log(1e6) + (y_hi - std::log(1e6)) * k / 200.0;
      low = std::min(low, integrand(f, y));
    }
    rep.divergent = std::isfinite(low) && low > 0.0;
  }

  const double top = increasing_limit(f);
  const double y_top = std::log(top) - 1e-3;

  // Convexity of ℓ in ln ξ on (1e-12, top).
  {
    rep.log_convex = true;
    const double h = 1e-2;
    for (int k = 1; k < 2000; ++k) {
      const double y = y_lo + (y_top - y_lo) * k / 2000.0;
      if (y + h >= y_top) break;
      const double c = eval_ell(f, std::exp(y));
      const double second = eval_ell(f, std::exp(y + h)) - 2.0 * c + eval_ell(f, std::exp(y - h));
      if (second < -1e-9 * c) {
        rep.log_convex = false;
        break;
      }
    }
  }

  // Smallest a with ℓ(ξ) <= (1 + aλ) ℓ(ξ^{1+λ}) on [S, top), λ ∈ (0, 1], for S -> 0.
  {
    auto a_for = [&](double S) {
      double a = 0.0;
      const double ys = std::log(S);
      for (int k = 0; k <= 400; ++k) {
        const double y = ys + (y_top - ys) * k / 400.0;
        const double base = eval_ell(f, std::exp(y));
        for (int j = 0; j <= 30; ++j) {
          const double lambda = std::pow(10.0, -3.0 + 3.0 * j / 30.0);
          const double shifted = eval_ell(f, std::exp((1.0 + lambda) * y));
          if (shifted > 0.0) a = std::max(a, (base / shifted - 1.0) / lambda);
        }
      }
      return a;
    };
    const double a1 = a_for(1e-4), a2 = a_for(1e-8), a3 = a_for(1e-12);
    const double inc1 = a2 - a1, inc2 = a3 - a2;
    rep.a_needed = a3;
    rep.scaling = std::isfinite(a3) && (inc2 <= 0.5 * inc1 || inc2 <= 1e-3 * a3);
  }

  // ξℓ'/ℓ against 1/|ln ξ|, extrapolated to ξ -> 0.
  {
    std::vector<double> x, q;
    double qmax = 0.0;
    const double h = 1e-3;
    for (int k = 20; k <= 300; k += 5) {
      const double y = -k * std::log(10.0);
      const double d = (ln_ell(f, y + h) - ln_ell(f, y - h)) / (2.0 * h);
      x.push_back(1.0 / std::abs(y));
      q.push_back(d);
      qmax = std::max(qmax, std::abs(d));
    }
    const LineFit lf = least_squares(x, q);
    rep.zero_limit = qmax > 0.0 && std::abs(lf.intercept) <= 0.1 * qmax;
  }
  return rep;
}

double compute_L(const EllFunction& f, double t) {
  if (!(t >= 1.0)) throw std::domain_error("compute_L: t must be >= 1");
  const double value = L_of_log(f, std::log(t));
  if (!std::isfinite(value)) throw std::domain_error("compute_L: integral is not finite");
  return value;
}

double invert_L(const EllFunction& f, double y) {
  if (!(y > 0.0)) throw std::domain_error("invert_L: y must be positive");
  double lo = 0.0, hi = 1.0;
  while (L_of_log(f, hi) < y) {
    lo = hi;
    hi *= 2.0;
    if (hi > 700.0) throw std::domain_error("invert_L: y beyond representable range");
  }
  auto fn = [&](double Y) { return std::make_tuple(L_of_log(f, Y) - y, integrand(f, Y)); };
  std::uintmax_t iters = 100;
  const double Y = boost::math::tools::newton_raphson_iterate(fn, 0.5 * (lo + hi), lo, hi, 48, iters);
  return std::exp(Y);
}

double predicted_E(const EllFunction& f, double C1, double t) {
  if (!(C1 > 0.0) || !(t > 0.0)) throw std::domain_error("predicted_E: need C1 > 0 and t > 0");
  const double Y = std::log(invert_L(f, C1 * t));
  return Y + f.exponent() * ln_ell(f, -Y);
}

Scenario parse_scenario(const std::string& text) {
  std::string kind;
  auto params = parse_params(text, kind);
  auto take = [&](const char* name, double fallback) {
    auto it = params.find(name);
    if (it == params.end()) return fallback;
    const double v = it->second;
    params.erase(it);
    return v;
  };
  Scenario out;
  if (kind == "algebraic") {
    AlgebraicScenario s;
    s.dim = static_cast<int>(take("n", s.dim));
    s.gamma = take("gamma", s.gamma);
    s.eps = take("eps", s.eps);
    out = s;
  } else if (kind == "exponential") {
    ExponentialScenario s;
    s.dim = static_cast<int>(take("n", s.dim));
    s.beta = take("beta", s.beta);
    s.eps = take("eps", s.eps);
    out = s;
  } else if (kind == "doubly_exponential") {
    DoublyExponentialScenario s;
    s.dim = static_cast<int>(take("n", s.dim));
    s.beta = take("beta", s.beta);
    s.eps = take("eps", s.eps);
    out = s;
  } else {
    throw std::invalid_argument("scenario: unknown kind '" + kind + "'");
  }
  if (!params.empty()) throw std::invalid_argument("scenario: unknown parameter '" + params.begin()->first + "'");
  return out;
}

std::string to_string(const Scenario& s) {
  std::ostringstream os;
  os.precision(17);
  std::visit(overloaded{
                 [&](const AlgebraicScenario& a) {
                   os << "algebraic:n=" << a.dim << ",gamma=" << a.gamma << ",eps=" << a.eps;
                 },
                 [&](const ExponentialScenario& e) {
                   os << "exponential:n=" << e.dim << ",beta=" << e.beta << ",eps=" << e.eps;
                 },
                 [&](const DoublyExponentialScenario& d) {
                   os << "doubly_exponential:n=" << d.dim << ",beta=" << d.beta << ",eps=" << d.eps;
                 },
             },
             s);
  return os.str();
}

double PredictedLaw::evaluate(double t, double anchor_t, double anchor_E) const {
  const bool anchored = anchor_t > 0.0;
  switch (kind) {
    case LawKind::log_slope:
      return anchored ? anchor_E + value * (std::log(t) - std::log(anchor_t)) : value * std::log(t);
    case LawKind::power:
      return anchored ? anchor_E * std::pow(t / anchor_t, value) : std::pow(t, value);
    case LawKind::log_corrected:
      if (!(t > 1.0)) return std::nan("");
      return anchored ? anchor_E * (t / anchor_t) * std::pow(std::log(anchor_t) / std::log(t), value)
                      : t * std::pow(std::log(t), -value);
  }
  return std::nan("");
}

nlohmann::json PredictedLaw::to_json() const {
  const char* k = kind == LawKind::log_slope ? "log_slope" : kind == LawKind::power ? "power" : "log_corrected";
  return {{"kind", k}, {"value", value}, {"basis", basis}};
}

LawPair closed_form_laws(const Scenario& s) {
  auto check = [](int dim, double eps) {
    if (dim < 1) throw std::invalid_argument("laws: dimension must be >= 1");
    if (!(eps > 0.0)) throw std::invalid_argument("laws: eps must be positive");
  };
  return std::visit(
      overloaded{
          [&](const AlgebraicScenario& a) {
            check(a.dim, a.eps);
            if (!(a.gamma > a.dim)) throw std::invalid_argument("laws: algebraic decay needs gamma > n");
            const double lower = (a.gamma - a.dim - a.eps) / (a.dim + 2.0);
            if (!(lower > 0.0)) throw std::invalid_argument("laws: eps must be below gamma - n");
            return LawPair{PredictedLaw{LawKind::log_slope, (a.gamma - a.dim) / (a.dim + 2.0),
                                        "upper bound, algebraic decay"},
                           PredictedLaw{LawKind::log_slope, lower, "lower bound, algebraic decay"}};
          },
          [&](const ExponentialScenario& e) {
            check(e.dim, e.eps);
            if (!(e.beta > 0.0)) throw std::invalid_argument("laws: beta must be positive");
            const double q = (e.dim + 2.0) / e.beta;
            return LawPair{PredictedLaw{LawKind::power, 1.0 / (1.0 + q), "upper bound, exponential decay"},
                           PredictedLaw{LawKind::power, 1.0 / (1.0 + q + e.eps),
                                        "lower bound, exponential decay"}};
          },
          [&](const DoublyExponentialScenario& d) {
            check(d.dim, d.eps);
            if (!(d.beta > 0.0)) throw std::invalid_argument("laws: beta must be positive");
            return LawPair{std::nullopt,
                           PredictedLaw{LawKind::log_corrected, (d.dim + 2.0) / d.beta + d.eps,
                                        "lower bound, doubly exponential decay"}};
          },
      },
      s);
}

nlohmann::json FitResult::to_json() const {
  return {{"slope", slope}, {"intercept", intercept}, {"stderr", stderr_slope}, {"r2", r2},
          {"samples", samples}, {"window", {t_lo, t_hi}}};
}

FitResult fit_log_slope(std::span<const double> t, std::span<const double> E, double t_lo, double t_hi) {
  return fit_window(t, E, t_lo, t_hi, false);
}

FitResult fit_power(std::span<const double> t, std::span<const double> E, double t_lo, double t_hi) {
  return fit_window(t, E, t_lo, t_hi, true);
}

void write_predictions_csv(std::ostream& out, std::span<const double> t, const LawPair& laws,
                           double anchor_t, double anchor_E) {
  out << "t,E_pred_upper,E_pred_lower\n";
  char buf[96];
  for (double x : t) {
    const double up = laws.upper ? laws.upper->evaluate(x, anchor_t, anchor_E) : std::nan("");
    const double lo = laws.lower.evaluate(x, anchor_t, anchor_E);
    std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g\n", x, up, lo);
    out << buf;
  }
}

}  // namespace rpde
