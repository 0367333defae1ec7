#include "tlsbf/smoother.hpp"

#include "tlsbf/errors.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace tlsbf {

double
Sym2::min_eigenvalue() const
{
  const double half_trace = 0.5 * (xx + yy);
  const double diff = 0.5 * (xx - yy);
  return half_trace - std::sqrt(diff * diff + xy * xy);
}

bool
ComponentCurve::is_zero() const
{
  auto zero = [](double v) { return v == 0.0; };
  return std::all_of(value.begin(), value.end(), zero) &&
         std::all_of(deriv.begin(), deriv.end(), zero);
}

DesignField::DesignField(std::span<const std::reference_wrapper<const Sample>> populations,
                         const Bandwidths& bandwidths,
                         const EvalGrid& grid,
                         const BaselineKernel& kernel,
                         SmootherMode mode,
                         double ridge_floor)
  : grid_(grid)
  , bandwidths_(bandwidths)
  , kernel_(kernel)
  , mode_(mode)
  , ridge_floor_(ridge_floor)
{
  if (populations.empty())
    throw DataError("design needs at least one population");
  const std::size_t d = populations.front().get().d();
  std::size_t n = 0;
  for (const Sample& s : populations) {
    if (s.d() != d)
      throw DataError("populations disagree on the number of covariates");
    n += s.n();
  }
  if (bandwidths.size() != d)
    throw DataError("expected " + std::to_string(d) + " bandwidths, got " +
                    std::to_string(bandwidths.size()));

  centered_y_.reserve(n);
  double total = 0.0;
  for (const Sample& s : populations) {
    const double ybar = s.mean_y();
    for (double y : s.y()) {
      centered_y_.push_back(y - ybar);
      total += y;
    }
    population_sizes_.push_back(s.n());
  }
  mean_y_ = total / static_cast<double>(n);

  const std::size_t G = grid.size();
  const double inv_n = 1.0 / static_cast<double>(n);
  const bool ll = mode == SmootherMode::local_linear;
  weights_.reserve(d);
  mjj_.assign(d, std::vector<Sym2>(G));
  mjj_inv_.assign(d, std::vector<Sym2>(G));
  pj_.assign(d, std::vector<Vec2>(G));
  mj_.assign(d, std::vector<Vec2>(G));
  mass_.assign(d, 0.0);

  std::vector<double> column(n);
  for (std::size_t j = 0; j < d; ++j) {
    std::size_t row = 0;
    for (const Sample& s : populations)
      for (double v : s.x().col(j))
        column[row++] = v;
    weights_.emplace_back(column, grid, bandwidths[j], kernel);
    const WeightField& w = weights_.back();
    auto& M = mjj_[j];
    auto& p = pj_[j];
    auto& m = mj_[j];
    const double h = bandwidths[j];
    for (std::size_t i = 0; i < n; ++i) {
      const auto band = w.band(i);
      const std::size_t first = w.first(i);
      const double xi = w.sample(i);
      const double yi = centered_y_[i];
      for (std::size_t b = 0; b < band.size(); ++b) {
        const std::size_t g = first + b;
        const double k = band[b];
        const double t = ll ? (xi - grid[g]) / h : 0.0;
        M[g].xx += k;
        M[g].xy += k * t;
        M[g].yy += k * t * t;
        m[g].a += k * yi;
        m[g].b += k * t * yi;
      }
    }
    for (std::size_t g = 0; g < G; ++g) {
      M[g].xx *= inv_n;
      M[g].xy *= inv_n;
      M[g].yy *= inv_n;
      m[g].a *= inv_n;
      m[g].b *= inv_n;
      p[g] = { M[g].xx, M[g].xy };
      if (ll) {
        const double a = M[g].xx + ridge_floor;
        const double c = M[g].yy + ridge_floor;
        const double det = a * c - M[g].xy * M[g].xy;
        mjj_inv_[j][g] = { c / det, -M[g].xy / det, a / det };
      } else {
        mjj_inv_[j][g] = { 1.0 / (M[g].xx + ridge_floor), 0.0, 0.0 };
      }
    }
    std::vector<double> first_entry(G);
    for (std::size_t g = 0; g < G; ++g)
      first_entry[g] = p[g].a;
    mass_[j] = grid.integrate(first_entry);
  }
}

std::vector<Mat2>
DesignField::cross_matrix(std::size_t j, std::size_t k) const
{
  const std::size_t G = grid_.size();
  const double inv_n = 1.0 / static_cast<double>(n());
  std::vector<Mat2> out(G * G);
  const WeightField& wj = weights_[j];
  const WeightField& wk = weights_[k];
  for (std::size_t i = 0; i < n(); ++i) {
    const auto bj = wj.band(i);
    const auto bk = wk.band(i);
    for (std::size_t a = 0; a < bj.size(); ++a) {
      const std::size_t gx = wj.first(i) + a;
      const double tj = offset(j, gx, i);
      for (std::size_t b = 0; b < bk.size(); ++b) {
        const std::size_t gy = wk.first(i) + b;
        const double tk = offset(k, gy, i);
        const double kk = bj[a] * bk[b] * inv_n;
        Mat2& cell = out[gx * G + gy];
        cell.m00 += kk;
        cell.m01 += kk * tk;
        cell.m10 += kk * tj;
        cell.m11 += kk * tj * tk;
      }
    }
  }
  return out;
}

DesignField
build_design(const Sample& sample,
             const Bandwidths& bandwidths,
             const EvalGrid& grid,
             const BaselineKernel& kernel,
             SmootherMode mode,
             double ridge_floor)
{
  const std::reference_wrapper<const Sample> pops[] = { std::cref(sample) };
  return DesignField(pops, bandwidths, grid, kernel, mode, ridge_floor);
}

ComponentCurve
marginal_ll(const DesignField& design, std::size_t j)
{
  const std::size_t G = design.grid().size();
  const auto M = design.Mjj(j);
  const auto Minv = design.Mjj_inverse(j);
  const auto m = design.mj(j);
  const double h = design.bandwidth(j);
  const bool ll = design.mode() == SmootherMode::local_linear;
  auto out = ComponentCurve::zero(G);
  for (std::size_t g = 0; g < G; ++g) {
    const double eig = ll ? M[g].min_eigenvalue() : M[g].xx;
    if (!(eig > design.ridge_floor()))
      throw IllConditioned("local-linear design of covariate " + std::to_string(j) +
                             " is singular at x = " + std::to_string(design.grid()[g]),
                           j,
                           design.grid()[g]);
    out.value[g] = Minv[g].xx * m[g].a + Minv[g].xy * m[g].b;
    if (ll)
      out.deriv[g] = (Minv[g].xy * m[g].a + Minv[g].yy * m[g].b) / h;
  }
  return out;
}

std::vector<double>
smoothed_evaluations(const DesignField& design, std::size_t k, const ComponentCurve& curve)
{
  const WeightField& w = design.weights(k);
  const EvalGrid& grid = design.grid();
  const bool ll = design.mode() == SmootherMode::local_linear;
  std::vector<double> s(design.n(), 0.0);
  for (std::size_t i = 0; i < design.n(); ++i) {
    const auto band = w.band(i);
    const std::size_t first = w.first(i);
    const double xi = w.sample(i);
    double acc = 0.0;
    for (std::size_t b = 0; b < band.size(); ++b) {
      const std::size_t g = first + b;
      double fitted = curve.value[g];
      if (ll)
        fitted += (xi - grid[g]) * curve.deriv[g];
      acc += grid.weight(g) * band[b] * fitted;
    }
    s[i] = acc;
  }
  return s;
}

std::vector<Vec2>
projection_field(const DesignField& design, std::size_t j, std::span<const double> r)
{
  const WeightField& w = design.weights(j);
  const EvalGrid& grid = design.grid();
  const double h = design.bandwidth(j);
  const bool ll = design.mode() == SmootherMode::local_linear;
  const double inv_n = 1.0 / static_cast<double>(design.n());
  std::vector<Vec2> out(grid.size());
  for (std::size_t i = 0; i < design.n(); ++i) {
    const auto band = w.band(i);
    const std::size_t first = w.first(i);
    const double xi = w.sample(i);
    const double ri = r[i] * inv_n;
    for (std::size_t b = 0; b < band.size(); ++b) {
      const std::size_t g = first + b;
      const double kr = band[b] * ri;
      out[g].a += kr;
      if (ll)
        out[g].b += kr * (xi - grid[g]) / h;
    }
  }
  return out;
}

std::vector<Vec2>
cross_term(const DesignField& design, std::size_t j, std::size_t k, const ComponentCurve& other)
{
  if (other.size() != design.grid().size())
    throw DataError("curve length does not match the design grid");
  return projection_field(design, j, smoothed_evaluations(design, k, other));
}

double
tuple_norm(const ComponentCurve& curve, const DesignField& design, std::size_t j)
{
  const auto M = design.Mjj(j);
  const double h = design.bandwidth(j);
  const EvalGrid& grid = design.grid();
  double total = 0.0;
  for (std::size_t g = 0; g < grid.size(); ++g) {
    const double a = curve.value[g];
    const double b = h * curve.deriv[g];
    const double q = a * (M[g].xx * a + 2.0 * M[g].xy * b) + M[g].yy * b * b;
    total += grid.weight(g) * q;
  }
  return std::sqrt(std::max(total, 0.0));
}

double
pi00_constant(const ComponentCurve& curve, const DesignField& design, std::size_t j)
{
  const auto p = design.pj(j);
  const double h = design.bandwidth(j);
  const EvalGrid& grid = design.grid();
  double total = 0.0;
  for (std::size_t g = 0; g < grid.size(); ++g)
    total += grid.weight(g) * (curve.value[g] * p[g].a + h * curve.deriv[g] * p[g].b);
  return total;
}

ComponentCurve
center_constraint(const ComponentCurve& curve, const DesignField& design, std::size_t j)
{
  const double mass = design.marginal_mass(j);
  if (!(mass > 0.0))
    throw IllConditioned("covariate " + std::to_string(j) + " has zero marginal mass", j, 0.0);
  const double c = pi00_constant(curve, design, j) / mass;
  ComponentCurve out = curve;
  for (double& v : out.value)
    v -= c;
  return out;
}

} // namespace tlsbf
