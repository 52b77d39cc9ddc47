#include "rpde/radial_core.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <ostream>
#include <stdexcept>

namespace rpde {

double unit_sphere_area(int dim) {
  if (dim < 1) throw std::invalid_argument("dimension must be >= 1");
  const double half = 0.5 * dim;
  return 2.0 * std::pow(std::numbers::pi, half) / std::tgamma(half);
}

RadialGrid RadialGrid::build(int dim, double radius, std::size_t intervals,
                             Grading grading, double ratio) {
  if (dim < 1) throw std::invalid_argument("grid: dimension must be >= 1");
  if (!(radius > 0.0) || !std::isfinite(radius))
    throw std::invalid_argument("grid: radius must be positive");
  if (intervals < 8) throw std::invalid_argument("grid: need at least 8 intervals");

  RadialGrid g;
  g.dim_ = dim;
  g.sphere_area_ = unit_sphere_area(dim);
  g.radii_.resize(intervals + 1);
  g.radii_[0] = 0.0;
  if (grading == Grading::uniform) {
    const double h = radius / static_cast<double>(intervals);
    for (std::size_t i = 1; i <= intervals; ++i) g.radii_[i] = h * static_cast<double>(i);
  } else {
    if (!(ratio > 1.0)) throw std::invalid_argument("grid: geometric ratio must exceed 1");
    // Δr_i = Δr_0 q^i with Σ Δr_i = R.
    const double m = static_cast<double>(intervals);
    const double first = radius * (ratio - 1.0) / std::expm1(m * std::log(ratio));
    double step = first;
    for (std::size_t i = 1; i <= intervals; ++i) {
      g.radii_[i] = g.radii_[i - 1] + step;
      step *= ratio;
    }
  }
  g.radii_.back() = radius;
  for (std::size_t i = 1; i <= intervals; ++i)
    if (!(g.radii_[i] > g.radii_[i - 1]))
      throw std::invalid_argument("grid: radii not strictly increasing (ratio too large?)");
  g.assemble();
  return g;
}

void RadialGrid::assemble() {
  const std::size_t nodes = radii_.size();
  const double n = dim_;
  auto moment = [n](double r) { return std::pow(r, n) / n; };

  volumes_.assign(nodes, 0.0);
  weights_.assign(nodes, 0.0);
  conductances_.assign(nodes - 1, 0.0);

  double inner = 0.0;
  for (std::size_t i = 0; i < nodes; ++i) {
    const double outer = (i + 1 < nodes) ? 0.5 * (radii_[i] + radii_[i + 1]) : radii_.back();
    volumes_[i] = moment(outer) - moment(inner);
    weights_[i] = sphere_area_ * volumes_[i];
    if (i + 1 < nodes)
      conductances_[i] = std::pow(outer, n - 1.0) / (radii_[i + 1] - radii_[i]);
    inner = outer;
  }
}

double RadialGrid::min_spacing() const {
  double h = radii_[1] - radii_[0];
  for (std::size_t i = 2; i < radii_.size(); ++i) h = std::min(h, radii_[i] - radii_[i - 1]);
  return h;
}

double RadialGrid::ball_volume() const {
  return sphere_area_ * std::pow(radius(), dim_) / dim_;
}

RadialField::RadialField(GridPtr grid, std::vector<double> values)
    : grid_(std::move(grid)), values_(std::move(values)) {
  if (!grid_) throw std::invalid_argument("field: null grid");
  if (values_.size() != grid_->size())
    throw std::invalid_argument("field: value count does not match node count");
}

RadialField::RadialField(GridPtr grid, double fill)
    : grid_(std::move(grid)), values_(grid_ ? grid_->size() : 0, fill) {
  if (!grid_) throw std::invalid_argument("field: null grid");
}

double RadialField::max() const { return *std::max_element(values_.begin(), values_.end()); }
double RadialField::min() const { return *std::min_element(values_.begin(), values_.end()); }

bool RadialField::all_finite() const {
  return std::all_of(values_.begin(), values_.end(), [](double x) { return std::isfinite(x); });
}

double integrate(const RadialField& f) {
  const auto w = f.grid().quad_weights();
  const auto v = f.values();
  double sum = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) sum += w[i] * v[i];
  return sum;
}

RadialField radial_laplacian(const RadialField& f) {
  const RadialGrid& g = f.grid();
  const std::size_t m = g.intervals();
  if (m < 3) throw std::invalid_argument("laplacian: grid too small");
  const auto c = g.conductances();
  const auto vol = g.cell_volumes();
  const auto r = g.radii();
  const auto v = f.values();

  std::vector<double> out(v.size());
  for (std::size_t i = 0; i < m; ++i) {
    double flux = c[i] * (v[i + 1] - v[i]);
    if (i > 0) flux -= c[i - 1] * (v[i] - v[i - 1]);
    out[i] = flux / vol[i];
  }

  // One-sided at r = R from the quadratic through the last three nodes.
  const double x0 = r[m - 2], x1 = r[m - 1], x2 = r[m];
  const double f0 = v[m - 2], f1 = v[m - 1], f2 = v[m];
  const double d01 = x0 - x1, d02 = x0 - x2, d12 = x1 - x2;
  const double second = 2.0 * (f0 / (d01 * d02) - f1 / (d01 * d12) + f2 / (d02 * d12));
  const double first = f0 * (x2 - x1) / (d01 * d02) - f1 * (x2 - x0) / (d01 * d12) +
                       f2 * ((x2 - x0) + (x2 - x1)) / (d02 * d12);
  out[m] = second + (g.dim() - 1) * first / x2;
  return RadialField(f.grid_ptr(), std::move(out));
}

namespace {

// Largest |f|, used to keep quadratic sums clear of underflow for tiny fields.
double magnitude(std::span<const double> v) {
  double m = 0.0;
  for (double x : v) m = std::max(m, std::abs(x));
  return m;
}

}  // namespace

double dirichlet_energy(const RadialField& f) {
  const auto c = f.grid().conductances();
  const auto v = f.values();
  const double scale = magnitude(v);
  if (scale == 0.0) return 0.0;
  double sum = 0.0;
  for (std::size_t i = 0; i < c.size(); ++i) {
    const double d = (v[i + 1] - v[i]) / scale;
    sum += c[i] * d * d;
  }
  return f.grid().sphere_area() * sum * scale * scale;
}

double dissipation(const RadialField& f, double p) {
  if (!(p > 0.0)) throw std::domain_error("dissipation: p must be positive");
  if (p == 1.0) return dirichlet_energy(f);
  const auto c = f.grid().conductances();
  const auto v = f.values();
  const double scale = magnitude(v);
  if (scale == 0.0) return 0.0;
  double sum = 0.0;
  double prev = std::pow(v[0] / scale, p);
  for (std::size_t i = 0; i < c.size(); ++i) {
    if (v[i] < 0.0 || v[i + 1] < 0.0) throw std::domain_error("dissipation: negative sample");
    const double next = std::pow(v[i + 1] / scale, p);
    sum += c[i] * (v[i + 1] - v[i]) / scale * (next - prev);
    prev = next;
  }
  return f.grid().sphere_area() * sum / p * std::pow(scale, p + 1.0);
}

double lp_integral(const RadialField& f, double p) {
  if (!(p > 0.0)) throw std::domain_error("lp: p must be positive");
  const bool integral_p = std::floor(p) == p;
  const auto w = f.grid().quad_weights();
  const auto v = f.values();
  double sum = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (v[i] < 0.0 && !integral_p)
      throw std::domain_error("lp: negative sample with fractional exponent");
    sum += w[i] * std::pow(v[i], p);
  }
  return sum;
}

double lp_seminorm(const RadialField& f, double p) {
  return std::pow(lp_integral(f, p), 1.0 / p);
}

RadialField exact_phi(const GridPtr& grid) {
  const double big = grid->radius() * grid->radius();
  const double n2 = 2.0 * grid->dim();
  return sample(grid, [&](double r) { return (big - r * r) / n2; });
}

void write_field_csv(std::ostream& out, const RadialField& f) {
  out << "r,value\n";
  char buf[64];
  const auto r = f.grid().radii();
  for (std::size_t i = 0; i < f.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%.17g,%.17g\n", r[i], f[i]);
    out << buf;
  }
}

void write_field_csv(const std::string& path, const RadialField& f) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path);
  write_field_csv(out, f);
}

double interpolate_at(const RadialField& f, double r) {
  const auto x = f.grid().radii();
  if (r <= 0.0) return f[0];
  if (r >= x.back()) return f[f.size() - 1];
  const auto it = std::upper_bound(x.begin(), x.end(), r);
  const std::size_t j = static_cast<std::size_t>(it - x.begin());
  const double theta = (r - x[j - 1]) / (x[j] - x[j - 1]);
  return (1.0 - theta) * f[j - 1] + theta * f[j];
}

}  // namespace rpde
