#pragma once

#include <cstddef>
#include <span>
#include <string_view>
#include <utility>
#include <vector>

namespace tlsbf {

enum class KernelKind
{
  epanechnikov,
  quartic
};

KernelKind parse_kernel(std::string_view name);
std::string_view kernel_name(KernelKind kind);

//! Symmetric baseline kernel supported on [-1, 1] with unit mass.
class BaselineKernel
{
public:
  explicit BaselineKernel(KernelKind kind = KernelKind::epanechnikov)
    : kind_(kind)
  {}

  KernelKind kind() const { return kind_; }

  double operator()(double u) const;

  //! int_a^b v^ell k(v) dv, limits clipped to [-1, 1]; ell in {0, 1, 2}.
  double partial_moment(int ell, double a, double b) const;

  //! int v^2 k(v) dv over the full support.
  double mu2() const { return partial_moment(2, -1.0, 1.0); }

private:
  KernelKind kind_;
};

//! Equally spaced evaluation points on [0,1], endpoints included.
class EvalGrid
{
public:
  explicit EvalGrid(std::size_t size = 401);

  std::size_t size() const { return points_.size(); }
  double operator[](std::size_t g) const { return points_[g]; }
  double spacing() const { return spacing_; }
  std::span<const double> points() const { return points_; }

  //! Trapezoid quadrature weight of grid node g.
  double weight(std::size_t g) const
  {
    return (g == 0 || g + 1 == points_.size()) ? 0.5 * spacing_ : spacing_;
  }

  double integrate(std::span<const double> values) const;

  //! Interval index and fractional position of x in [0,1] for linear
  //! interpolation; x == 1 maps to the last interval with fraction 1.
  std::pair<std::size_t, double> locate(double x) const;

  double interpolate(std::span<const double> values, double x) const;

  bool operator==(const EvalGrid& other) const { return size() == other.size(); }

private:
  std::vector<double> points_;
  double spacing_;
};

//! Per-covariate bandwidths together with the reference bandwidth h and the
//! ratio bounds C_L <= h_j / h <= C_U.
class Bandwidths
{
public:
  Bandwidths() = default;

  //! Reference bandwidth defaults to the geometric mean of the entries.
  explicit Bandwidths(std::vector<double> per_covariate);
  Bandwidths(std::vector<double> per_covariate, double reference);

  static Bandwidths constant(std::size_t d, double h);

  std::size_t size() const { return per_covariate_.size(); }
  double operator[](std::size_t j) const { return per_covariate_[j]; }
  std::span<const double> values() const { return per_covariate_; }
  double reference() const { return reference_; }
  double lower_ratio() const { return lower_ratio_; }
  double upper_ratio() const { return upper_ratio_; }

private:
  std::vector<double> per_covariate_;
  double reference_ = 0.0;
  double lower_ratio_ = 0.0;
  double upper_ratio_ = 0.0;
};

//! Throws InvalidBandwidth unless 0 < h <= 0.5.
void validate_bandwidth(double h);

//! Boundary-normalized kernel K_h(u, v) = K_h(u - v) / int_0^1 K_h(w - v) dw,
//! with the denominator taken in closed form from the kernel's moments.
double normalized_weight(double u,
                         double v,
                         double h,
                         const BaselineKernel& kernel = BaselineKernel());

enum class Normalization
{
  //! Denominator is the trapezoid sum of K_h(x_g - v) over the grid, so each
  //! column integrates to one under the grid quadrature exactly.
  grid,
  //! Denominator is the exact integral (matches normalized_weight).
  analytic
};

//! Normalized kernel weights W[g][i] = K_h(grid[g], X_i) for one covariate,
//! stored as one contiguous band of grid nodes per sample.
class WeightField
{
public:
  WeightField(std::span<const double> samples,
              const EvalGrid& grid,
              double h,
              const BaselineKernel& kernel = BaselineKernel(),
              Normalization normalization = Normalization::grid);

  std::size_t samples() const { return x_.size(); }
  std::size_t grid_size() const { return grid_size_; }
  double bandwidth() const { return h_; }
  double sample(std::size_t i) const { return x_[i]; }
  std::span<const double> sample_values() const { return x_; }

  //! First grid index of the band of sample i.
  std::size_t first(std::size_t i) const { return first_[i]; }
  std::span<const double> band(std::size_t i) const
  {
    return { values_.data() + offsets_[i], offsets_[i + 1] - offsets_[i] };
  }

  double operator()(std::size_t g, std::size_t i) const;

private:
  std::vector<double> x_;
  std::vector<std::size_t> first_;
  std::vector<std::size_t> offsets_;
  std::vector<double> values_;
  std::size_t grid_size_;
  double h_;
};

struct KernelMoments
{
  double mu0;
  double mu1;
  double mu2;
};

//! Incomplete moments mu_l(x) = int_0^1 ((u - x)/h)^l K_h(u, x) du at each
//! grid point.
std::vector<KernelMoments> kernel_moments(const EvalGrid& grid,
                                          double h,
                                          const BaselineKernel& kernel = BaselineKernel());

} // namespace tlsbf
