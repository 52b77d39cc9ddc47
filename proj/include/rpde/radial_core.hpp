#pragma once

#include <cstddef>
#include <iosfwd>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace rpde {

enum class Grading { uniform, geometric };

/// Nodes 0 = r_0 < r_1 < ... < r_M = R of a truncated ball B_R in dimension n,
/// together with the finite-volume geometry used by every discrete operator.
///
/// Node i owns the dual cell [r_{i-1/2}, r_{i+1/2}] with faces at the
/// arithmetic midpoints (r_{-1/2} = 0, r_{M+1/2} = R). Quadrature weights are
/// the exact measures ω_n ∫ r^{n-1} dr of those cells, so the weights of a
/// constant field sum to |B_R| to roundoff on any grid. For n = 1 this is the
/// trapezoid rule.
class RadialGrid {
 public:
  /// M intervals (M + 1 nodes). Throws std::invalid_argument for dim < 1,
  /// radius <= 0, intervals < 8 or (geometric) ratio <= 1.
  static RadialGrid build(int dim, double radius, std::size_t intervals,
                          Grading grading = Grading::uniform, double ratio = 1.0);

  int dim() const { return dim_; }
  double radius() const { return radii_.back(); }
  double sphere_area() const { return sphere_area_; }
  std::size_t size() const { return radii_.size(); }
  std::size_t intervals() const { return radii_.size() - 1; }

  std::span<const double> radii() const { return radii_; }
  std::span<const double> quad_weights() const { return weights_; }
  /// Dual-cell measure ∫ r^{n-1} dr (quad weight without ω_n).
  std::span<const double> cell_volumes() const { return volumes_; }
  /// Face conductance r_{i+1/2}^{n-1} / (r_{i+1} - r_i), one per interval.
  std::span<const double> conductances() const { return conductances_; }

  double min_spacing() const;
  double ball_volume() const;

 private:
  RadialGrid() = default;
  void assemble();

  int dim_ = 1;
  double sphere_area_ = 2.0;
  std::vector<double> radii_;
  std::vector<double> weights_;
  std::vector<double> volumes_;
  std::vector<double> conductances_;
};

/// |∂B_1| in dimension n.
double unit_sphere_area(int dim);

using GridPtr = std::shared_ptr<const RadialGrid>;

/// Radially symmetric samples on a shared grid.
class RadialField {
 public:
  RadialField(GridPtr grid, std::vector<double> values);
  explicit RadialField(GridPtr grid, double fill = 0.0);

  const RadialGrid& grid() const { return *grid_; }
  const GridPtr& grid_ptr() const { return grid_; }
  std::span<const double> values() const { return values_; }
  std::span<double> values() { return values_; }
  std::size_t size() const { return values_.size(); }

  double operator[](std::size_t i) const { return values_[i]; }
  double& operator[](std::size_t i) { return values_[i]; }

  double max() const;
  double min() const;
  bool all_finite() const;

 private:
  GridPtr grid_;
  std::vector<double> values_;
};

double integrate(const RadialField& f);

/// Flux-form central differences; at r = 0 this reduces to 2n(f_1 - f_0)/r_1²
/// on uniform grids. Exact for quadratics in r at every node, including the
/// one-sided value at r = R.
RadialField radial_laplacian(const RadialField& f);

/// Discrete ∫|∇f|²: ω_n Σ_faces r_{i+1/2}^{n-1} (f_{i+1}-f_i)² / Δr_i.
double dirichlet_energy(const RadialField& f);

/// Discrete ∫ f^{p-1}|∇f|². The face value of f^{p-1} is the mean-value
/// quotient (f_{i+1}^p - f_i^p) / (p (f_{i+1} - f_i)), which makes
/// Σ w f^p Δf = -p · dissipation(f, p) hold exactly up to the boundary flux.
/// Reduces to dirichlet_energy for p = 1. Requires f >= 0.
double dissipation(const RadialField& f, double p);

/// ∫ f^p. Throws std::domain_error on negative samples when p is not an integer.
double lp_integral(const RadialField& f, double p);
/// (∫ f^p)^{1/p}.
double lp_seminorm(const RadialField& f, double p);

/// (R² - r²)/(2n): the solution of -Δφ = 1 in B_R vanishing on ∂B_R.
RadialField exact_phi(const GridPtr& grid);

/// Samples `fn(r)` at every node.
template <class Fn>
RadialField sample(const GridPtr& grid, Fn&& fn) {
  std::vector<double> v(grid->size());
  const auto r = grid->radii();
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = fn(r[i]);
  return RadialField(grid, std::move(v));
}

/// Header `r,value`, one row per node, %.17g.
void write_field_csv(std::ostream& out, const RadialField& f);
void write_field_csv(const std::string& path, const RadialField& f);

/// Piecewise-linear evaluation at an arbitrary radius in [0, R].
double interpolate_at(const RadialField& f, double r);

}  // namespace rpde
