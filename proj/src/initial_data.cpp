#include "rpde/initial_data.hpp"

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <cmath>
#include <limits>
#include <map>
#include <sstream>
#include <stdexcept>

namespace rpde {

namespace {

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

double binomial(int n, int k) {
  double b = 1.0;
  for (int j = 1; j <= k; ++j) b = b * (n - k + j) / j;
  return b;
}

}  // namespace

double profile(const DecayFamily& family, double r) {
  return std::visit(
      overloaded{
          [r](const Algebraic& a) { return a.c0 * std::pow(1.0 + r, -a.gamma); },
          [r](const Exponential& e) { return e.c0 * std::exp(-e.alpha * std::pow(r, e.beta)); },
          [r](const DoublyExponential& d) {
            return d.c0 * std::exp(-d.alpha * std::exp(std::pow(r, d.beta)));
          },
          [r](const Custom& c) { return c.profile(r); },
      },
      family);
}

void validate(const DecayFamily& family, int dim) {
  auto positive = [](double x, const char* what) {
    if (!(x > 0.0) || !std::isfinite(x))
      throw std::invalid_argument(std::string("initial data: ") + what + " must be positive");
  };
  std::visit(overloaded{
                 [&](const Algebraic& a) {
                   positive(a.c0, "c0");
                   positive(a.gamma, "gamma");
                   if (!(a.gamma > dim))
                     throw std::invalid_argument("initial data: algebraic decay needs gamma > n");
                 },
                 [&](const Exponential& e) {
                   positive(e.c0, "c0");
                   positive(e.alpha, "alpha");
                   positive(e.beta, "beta");
                 },
                 [&](const DoublyExponential& d) {
                   positive(d.c0, "c0");
                   positive(d.alpha, "alpha");
                   positive(d.beta, "beta");
                 },
                 [&](const Custom& c) {
                   if (!c.profile) throw std::invalid_argument("initial data: empty custom profile");
                 },
             },
             family);
}

RadialField sample(const DecayFamily& family, const GridPtr& grid) {
  return sample(grid, [&](double r) { return profile(family, r); });
}

Normalized normalize_unit_mass(const RadialField& f) {
  const double mass = integrate(f);
  if (!(mass > 0.0) || !std::isfinite(mass))
    throw std::domain_error("normalize: mass must be positive");
  const double scale = 1.0 / mass;
  std::vector<double> v(f.values().begin(), f.values().end());
  for (double& x : v) x *= scale;
  return {RadialField(f.grid_ptr(), std::move(v)), scale};
}

bool check_integrability(const DecayFamily& family, int dim, double p) {
  if (const auto* a = std::get_if<Algebraic>(&family)) return p * a->gamma > dim;
  return p > 0.0;
}

double tail_mass(const DecayFamily& family, int dim, double radius) {
  const double omega = unit_sphere_area(dim);
  if (const auto* a = std::get_if<Algebraic>(&family)) {
    // r^{n-1} = Σ_k C(n-1,k) (1+r)^k (-1)^{n-1-k}
    double sum = 0.0;
    for (int k = 0; k <= dim - 1; ++k) {
      const double sign = ((dim - 1 - k) % 2 == 0) ? 1.0 : -1.0;
      const double expo = k - a->gamma + 1.0;
      sum += sign * binomial(dim - 1, k) * std::pow(1.0 + radius, expo) / (-expo);
    }
    return omega * a->c0 * sum;
  }
  using boost::math::quadrature::gauss_kronrod;
  auto integrand = [&](double r) { return profile(family, r) * std::pow(r, dim - 1); };
  return omega * gauss_kronrod<double, 31>::integrate(integrand, radius,
                                                      std::numeric_limits<double>::infinity(),
                                                      15, 1e-12);
}

RegularizedData regularized_unit_mass_data(const DecayFamily& family, const GridPtr& grid,
                                           double eps_rel) {
  if (!(eps_rel > 0.0)) throw std::invalid_argument("initial data: eps_rel must be positive");
  const RadialField raw = sample(family, grid);
  const double at_wall = raw[raw.size() - 1];
  const double shift = eps_rel * raw[0] - at_wall;
  std::vector<double> v(raw.values().begin(), raw.values().end());
  for (double& x : v) x += shift;
  auto [field, scale] = normalize_unit_mass(RadialField(grid, std::move(v)));
  const double eps = field[field.size() - 1];
  return {std::move(field), eps, scale};
}

DecayFamily parse_family(const std::string& text) {
  const auto colon = text.find(':');
  const std::string kind = text.substr(0, colon);
  std::map<std::string, double> params;
  if (colon != std::string::npos) {
    std::stringstream rest(text.substr(colon + 1));
    std::string item;
    while (std::getline(rest, item, ',')) {
      if (item.empty()) continue;
      const auto eq = item.find('=');
      if (eq == std::string::npos)
        throw std::invalid_argument("family: expected name=value, got '" + item + "'");
      const std::string name = item.substr(0, eq);
      std::size_t used = 0;
      double value = 0.0;
      try {
        value = std::stod(item.substr(eq + 1), &used);
      } catch (const std::exception&) {
        throw std::invalid_argument("family: bad number in '" + item + "'");
      }
      if (used != item.size() - eq - 1)
        throw std::invalid_argument("family: bad number in '" + item + "'");
      params[name] = value;
    }
  }
  auto take = [&](const char* name, double fallback) {
    auto it = params.find(name);
    if (it == params.end()) return fallback;
    const double v = it->second;
    params.erase(it);
    return v;
  };
  DecayFamily out;
  if (kind == "algebraic") {
    Algebraic a;
    a.c0 = take("c0", a.c0);
    a.gamma = take("gamma", a.gamma);
    out = a;
  } else if (kind == "exponential") {
    Exponential e;
    e.c0 = take("c0", e.c0);
    e.alpha = take("alpha", e.alpha);
    e.beta = take("beta", e.beta);
    out = e;
  } else if (kind == "doubly_exponential") {
    DoublyExponential d;
    d.c0 = take("c0", d.c0);
    d.alpha = take("alpha", d.alpha);
    d.beta = take("beta", d.beta);
    out = d;
  } else {
    throw std::invalid_argument("family: unknown kind '" + kind + "'");
  }
  if (!params.empty())
    throw std::invalid_argument("family: unknown parameter '" + params.begin()->first + "'");
  return out;
}

std::string to_string(const DecayFamily& family) {
  std::ostringstream os;
  os.precision(17);
  std::visit(overloaded{
                 [&](const Algebraic& a) { os << "algebraic:c0=" << a.c0 << ",gamma=" << a.gamma; },
                 [&](const Exponential& e) {
                   os << "exponential:c0=" << e.c0 << ",alpha=" << e.alpha << ",beta=" << e.beta;
                 },
                 [&](const DoublyExponential& d) {
                   os << "doubly_exponential:c0=" << d.c0 << ",alpha=" << d.alpha
                      << ",beta=" << d.beta;
                 },
                 [&](const Custom& c) { os << c.name; },
             },
             family);
  return os.str();
}

}  // namespace rpde
