#pragma once

#include "tlsbf/kernel.hpp"
#include "tlsbf/sample.hpp"

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

namespace tlsbf {

struct Vec2
{
  double a = 0.0;
  double b = 0.0;
};

//! Symmetric 2x2 matrix [[xx, xy], [xy, yy]].
struct Sym2
{
  double xx = 0.0;
  double xy = 0.0;
  double yy = 0.0;

  double min_eigenvalue() const;
};

//! General 2x2 matrix, row-major.
struct Mat2
{
  double m00 = 0.0;
  double m01 = 0.0;
  double m10 = 0.0;
  double m11 = 0.0;
};

//! An additive component and its raw derivative sampled on the grid. The
//! tuple used in the local-linear algebra is (value, h * deriv).
struct ComponentCurve
{
  std::vector<double> value;
  std::vector<double> deriv;

  static ComponentCurve zero(std::size_t grid_size)
  {
    return { std::vector<double>(grid_size, 0.0), std::vector<double>(grid_size, 0.0) };
  }

  bool is_zero() const;
  std::size_t size() const { return value.size(); }
};

enum class SmootherMode
{
  local_linear,
  //! Degenerate mode: slope column dropped, derivative forced to zero.
  nadaraya_watson
};

//! Empirical local-linear moments of one population (or a weighted pool of
//! populations) on the evaluation grid, for every covariate.
class DesignField
{
public:
  //! Pools the populations by concatenation, which realises the n_a / n_A
  //! weighting; each population's response is centred by its own mean.
  DesignField(std::span<const std::reference_wrapper<const Sample>> populations,
              const Bandwidths& bandwidths,
              const EvalGrid& grid,
              const BaselineKernel& kernel = BaselineKernel(),
              SmootherMode mode = SmootherMode::local_linear,
              double ridge_floor = 1e-10);

  std::size_t n() const { return centered_y_.size(); }
  std::size_t d() const { return weights_.size(); }
  const EvalGrid& grid() const { return grid_; }
  const Bandwidths& bandwidths() const { return bandwidths_; }
  double bandwidth(std::size_t j) const { return bandwidths_[j]; }
  SmootherMode mode() const { return mode_; }
  const BaselineKernel& kernel() const { return kernel_; }
  double ridge_floor() const { return ridge_floor_; }

  //! Responses minus their own population mean.
  std::span<const double> centered_response() const { return centered_y_; }
  //! Mean response over all pooled rows.
  double mean_response() const { return mean_y_; }
  std::span<const std::size_t> population_sizes() const { return population_sizes_; }

  const WeightField& weights(std::size_t j) const { return weights_[j]; }
  std::span<const Sym2> Mjj(std::size_t j) const { return mjj_[j]; }
  std::span<const Vec2> pj(std::size_t j) const { return pj_[j]; }
  std::span<const Vec2> mj(std::size_t j) const { return mj_[j]; }

  //! Ridge-regularised inverse of M_jj at every grid point.
  std::span<const Sym2> Mjj_inverse(std::size_t j) const { return mjj_inv_[j]; }

  //! int_0^1 p_j(x)[0] dx.
  double marginal_mass(std::size_t j) const { return mass_[j]; }

  //! Materialises M_jk(x_g, x_h) as a row-major G x G array. Quadratic in G;
  //! intended for verification only.
  std::vector<Mat2> cross_matrix(std::size_t j, std::size_t k) const;

  //! Offset (X_i - x_g) / h_j as used in the design vector, zero in NW mode.
  double offset(std::size_t j, std::size_t g, std::size_t i) const
  {
    if (mode_ == SmootherMode::nadaraya_watson)
      return 0.0;
    return (weights_[j].sample(i) - grid_[g]) / bandwidths_[j];
  }

private:
  EvalGrid grid_;
  Bandwidths bandwidths_;
  BaselineKernel kernel_;
  SmootherMode mode_;
  double ridge_floor_;
  std::vector<double> centered_y_;
  double mean_y_ = 0.0;
  std::vector<std::size_t> population_sizes_;
  std::vector<WeightField> weights_;
  std::vector<std::vector<Sym2>> mjj_;
  std::vector<std::vector<Sym2>> mjj_inv_;
  std::vector<std::vector<Vec2>> pj_;
  std::vector<std::vector<Vec2>> mj_;
  std::vector<double> mass_;
};

DesignField build_design(const Sample& sample,
                         const Bandwidths& bandwidths,
                         const EvalGrid& grid,
                         const BaselineKernel& kernel = BaselineKernel(),
                         SmootherMode mode = SmootherMode::local_linear,
                         double ridge_floor = 1e-10);

//! Marginal local-linear estimate M_jj^{-1} m_j of E(Y - Ybar | X_j = x).
//! Throws IllConditioned if M_jj is singular (below the ridge floor) at a
//! grid point.
ComponentCurve marginal_ll(const DesignField& design, std::size_t j);

//! Per-sample smoothed evaluations s_i = int Z_k^i(x)^T g^v(x) K(x, X_k^i) dx.
std::vector<double> smoothed_evaluations(const DesignField& design,
                                         std::size_t k,
                                         const ComponentCurve& curve);

//! (1/n) sum_i Z_j^i(x) K(x, X_j^i) r_i on the grid.
std::vector<Vec2> projection_field(const DesignField& design,
                                   std::size_t j,
                                   std::span<const double> r);

//! x -> int M_jk(x, y) g_k^v(y) dy, computed through per-sample scalars
//! without materialising M_jk.
std::vector<Vec2> cross_term(const DesignField& design,
                             std::size_t j,
                             std::size_t k,
                             const ComponentCurve& other);

//! ||g||_{M_jj} = sqrt(int g^v(x)^T M_jj(x) g^v(x) dx).
double tuple_norm(const ComponentCurve& curve, const DesignField& design, std::size_t j);

//! int g^v(x)^T p_j(x) dx.
double pi00_constant(const ComponentCurve& curve, const DesignField& design, std::size_t j);

//! Subtracts the constant that makes pi00_constant vanish from the value
//! component.
ComponentCurve center_constraint(const ComponentCurve& curve,
                                 const DesignField& design,
                                 std::size_t j);

} // namespace tlsbf
