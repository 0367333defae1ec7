#include "tlsbf/backfit.hpp"

#include "tlsbf/errors.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace tlsbf {

void
FitConfig::validate() const
{
  if (!(lambda >= 0.0) || !std::isfinite(lambda))
    throw ConfigError("lambda must be a finite nonnegative number");
  if (max_outer_iters < 1)
    throw ConfigError("max_outer_iters must be at least 1");
  if (!(tol > 0.0))
    throw ConfigError("tol must be positive");
  if (grid_size < 2)
    throw ConfigError("grid_size must be at least 2");
  if (!(ridge_floor >= 0.0))
    throw ConfigError("ridge_floor must be nonnegative");
}

void
AdditiveFit::refresh_active_set()
{
  active_set.clear();
  for (std::size_t j = 0; j < components.size(); ++j)
    if (!components[j].is_zero())
      active_set.push_back(j);
}

namespace {


void
check_conditioning(const DesignField& design)
{
  if (design.n() < singular_check_min_n)
    return;
  const bool ll = design.mode() == SmootherMode::local_linear;
  for (std::size_t j = 0; j < design.d(); ++j) {
    const auto M = design.Mjj(j);
    for (std::size_t g = 0; g < M.size(); ++g) {
      const double eig = ll ? M[g].min_eigenvalue() : M[g].xx;
      if (eig < singular_threshold)
        throw IllConditioned("local-linear design of covariate " + std::to_string(j) +
                               " is ill-conditioned at x = " + std::to_string(design.grid()[g]),
                             j,
                             design.grid()[g]);
    }
  }
}

void
check_offset(const DesignField& design, std::span<const ComponentCurve> offset)
{
  if (offset.empty())
    return;
  if (offset.size() != design.d())
    throw DataError("offset has " + std::to_string(offset.size()) + " components, expected " +
                    std::to_string(design.d()));
  for (const auto& c : offset)
    if (c.value.size() != design.grid().size() || c.deriv.size() != design.grid().size())
      throw DataError("offset curve length does not match the grid");
}

ComponentCurve
add_curves(const ComponentCurve& a, const ComponentCurve& b)
{
  ComponentCurve out = a;
  for (std::size_t g = 0; g < out.size(); ++g) {
    out.value[g] += b.value[g];
    out.deriv[g] += b.deriv[g];
  }
  return out;
}

// Block update given r_i = centred response minus the smoothed evaluations of
// every other (offset-inclusive) component.
ComponentCurve
update_from_residual(const DesignField& design,
                     std::size_t j,
                     std::span<const double> residual,
                     const ComponentCurve* own_offset,
                     double lambda)
{
  const std::size_t G = design.grid().size();
  const double h = design.bandwidth(j);
  const bool ll = design.mode() == SmootherMode::local_linear;
  const auto rhs = projection_field(design, j, residual);
  const auto Minv = design.Mjj_inverse(j);

  auto star = ComponentCurve::zero(G);
  for (std::size_t g = 0; g < G; ++g) {
    star.value[g] = Minv[g].xx * rhs[g].a + Minv[g].xy * rhs[g].b;
    if (ll)
      star.deriv[g] = (Minv[g].xy * rhs[g].a + Minv[g].yy * rhs[g].b) / h;
  }
  if (own_offset != nullptr) {
    for (std::size_t g = 0; g < G; ++g) {
      star.value[g] -= own_offset->value[g];
      if (ll)
        star.deriv[g] -= own_offset->deriv[g];
    }
  }
  star = center_constraint(star, design, j);

  const double norm = tuple_norm(star, design, j);
  if (lambda >= norm)
    return ComponentCurve::zero(G);
  const double shrink = 1.0 - lambda / norm;
  if (shrink != 1.0) {
    for (std::size_t g = 0; g < G; ++g) {
      star.value[g] *= shrink;
      star.deriv[g] *= shrink;
    }
  }
  return star;
}

// Smoothed quadratic form int c^T M_jj c.
double
quadratic_form(const ComponentCurve& c, const DesignField& design, std::size_t j)
{
  const double n = tuple_norm(c, design, j);
  return n * n;
}

class Backfitter
{
public:
  Backfitter(const DesignField& design, const FitConfig& cfg, std::span<const ComponentCurve> offset)
    : design_(design)
    , cfg_(cfg)
    , offset_(offset)
    , n_(design.n())
    , d_(design.d())
    , scores_(d_)
    , total_(n_, 0.0)
  {
    const std::size_t G = design.grid().size();
    components_.assign(d_, ComponentCurve::zero(G));
    for (std::size_t j = 0; j < d_; ++j) {
      if (!offset_.empty() && !offset_[j].is_zero())
        scores_[j] = smoothed_evaluations(design, j, offset_[j]);
      else
        scores_[j].assign(n_, 0.0);
      for (std::size_t i = 0; i < n_; ++i)
        total_[i] += scores_[j][i];
    }
  }

  bool update(std::size_t j)
  {
    const auto y = design_.centered_response();
    std::vector<double> residual(n_);
    const auto& sj = scores_[j];
    for (std::size_t i = 0; i < n_; ++i)
      residual[i] = y[i] - (total_[i] - sj[i]);
    const ComponentCurve* own = offset_.empty() ? nullptr : &offset_[j];
    ComponentCurve next = update_from_residual(design_, j, residual, own, cfg_.lambda);

    const bool was_zero = components_[j].is_zero();
    const bool now_zero = next.is_zero();
    double change = 0.0;
    for (std::size_t g = 0; g < next.size(); ++g)
      change = std::max(change, std::abs(next.value[g] - components_[j].value[g]));
    max_change_ = std::max(max_change_, change);
    components_[j] = std::move(next);

    if (!(was_zero && now_zero)) {
      std::vector<double> fresh;
      if (own != nullptr && !own->is_zero())
        fresh = smoothed_evaluations(design_, j, add_curves(components_[j], *own));
      else if (now_zero)
        fresh.assign(n_, 0.0);
      else
        fresh = smoothed_evaluations(design_, j, components_[j]);
      for (std::size_t i = 0; i < n_; ++i)
        total_[i] += fresh[i] - sj[i];
      scores_[j] = std::move(fresh);
    }
    return now_zero;
  }

  // Objective from the maintained scores:
  // (1/2n) sum_i [(y_i - S_i)^2 - sum_j s_ij^2] + (1/2) sum_j q_j + lambda sum_j ||g_j||.
  double objective() const
  {
    const auto y = design_.centered_response();
    double loss = 0.0;
    for (std::size_t i = 0; i < n_; ++i) {
      const double e = y[i] - total_[i];
      loss += e * e;
    }
    double quad = 0.0;
    double penalty = 0.0;
    for (std::size_t j = 0; j < d_; ++j) {
      const bool has_offset = !offset_.empty() && !offset_[j].is_zero();
      const bool has_comp = !components_[j].is_zero();
      if (!has_offset && !has_comp)
        continue;
      for (double s : scores_[j])
        loss -= s * s;
      const ComponentCurve combined =
        has_offset ? add_curves(components_[j], offset_[j]) : components_[j];
      quad += quadratic_form(combined, design_, j);
      if (has_comp)
        penalty += tuple_norm(components_[j], design_, j);
    }
    return loss / (2.0 * static_cast<double>(n_)) + 0.5 * quad + cfg_.lambda * penalty;
  }

  double take_max_change()
  {
    const double c = max_change_;
    max_change_ = 0.0;
    return c;
  }

  double max_abs_value() const
  {
    double m = 0.0;
    for (const auto& c : components_)
      for (double v : c.value)
        m = std::max(m, std::abs(v));
    return m;
  }

  std::vector<ComponentCurve> take_components() { return std::move(components_); }

private:
  const DesignField& design_;
  const FitConfig& cfg_;
  std::span<const ComponentCurve> offset_;
  std::size_t n_;
  std::size_t d_;
  std::vector<ComponentCurve> components_;
  std::vector<std::vector<double>> scores_;
  std::vector<double> total_;
  double max_change_ = 0.0;
};

constexpr int zero_streak_limit = 3;
constexpr int revisit_period = 5;

} // namespace

ComponentCurve
component_update(std::size_t j,
                 const AdditiveFit& current,
                 const DesignField& design,
                 std::span<const ComponentCurve> offset,
                 const FitConfig& cfg)
{
  check_offset(design, offset);
  if (current.d() != design.d())
    throw DataError("fit and design disagree on the number of covariates");
  const auto y = design.centered_response();
  std::vector<double> residual(y.begin(), y.end());
  for (std::size_t k = 0; k < design.d(); ++k) {
    if (k == j)
      continue;
    ComponentCurve c = offset.empty() ? current.components[k]
                                      : add_curves(current.components[k], offset[k]);
    if (c.is_zero())
      continue;
    const auto s = smoothed_evaluations(design, k, c);
    for (std::size_t i = 0; i < residual.size(); ++i)
      residual[i] -= s[i];
  }
  return update_from_residual(design, j, residual, offset.empty() ? nullptr : &offset[j], cfg.lambda);
}

AdditiveFit
fit(const DesignField& design, const FitConfig& cfg, std::span<const ComponentCurve> offset)
{
  cfg.validate();
  check_offset(design, offset);
  check_conditioning(design);

  const std::size_t d = design.d();
  Backfitter engine(design, cfg, offset);
  AdditiveFit out;
  out.intercept = design.mean_response();
  out.grid = design.grid();
  out.bandwidths = design.bandwidths();
  out.lambda = cfg.lambda;
  out.mode = design.mode();
  out.diagnostics.objective_trace.push_back(engine.objective());

  std::vector<int> zero_streak(d, 0);
  for (int cycle = 1; cycle <= cfg.max_outer_iters; ++cycle) {
    const bool full = !cfg.active_set_shortcut || cycle % revisit_period == 0;
    bool visited_all = true;
    for (std::size_t j = 0; j < d; ++j) {
      if (!full && zero_streak[j] >= zero_streak_limit) {
        visited_all = false;
        continue;
      }
      const bool zero = engine.update(j);
      zero_streak[j] = zero ? zero_streak[j] + 1 : 0;
    }
    out.diagnostics.objective_trace.push_back(engine.objective());
    out.diagnostics.outer_iters = cycle;
    const double change = engine.take_max_change() / (1.0 + engine.max_abs_value());
    if (change < cfg.tol) {
      if (visited_all) {
        out.diagnostics.converged = true;
        break;
      }
      // Converged on the visited subset: force a full sweep next cycle.
      std::fill(zero_streak.begin(), zero_streak.end(), 0);
    }
  }
  out.components = engine.take_components();
  out.refresh_active_set();
  return out;
}

DesignField
make_design(const Sample& sample, const Bandwidths& bandwidths, const FitConfig& cfg)
{
  return build_design(sample,
                      bandwidths,
                      EvalGrid(cfg.grid_size),
                      BaselineKernel(cfg.kernel),
                      cfg.mode,
                      cfg.ridge_floor);
}

AdditiveFit
fit(const Sample& sample,
    const Bandwidths& bandwidths,
    const FitConfig& cfg,
    std::span<const ComponentCurve> offset)
{
  cfg.validate();
  return fit(make_design(sample, bandwidths, cfg), cfg, offset);
}

double
penalized_objective(const DesignField& design,
                    const AdditiveFit& f,
                    const FitConfig& cfg,
                    std::span<const ComponentCurve> offset)
{
  check_offset(design, offset);
  const std::size_t n = design.n();
  const auto y = design.centered_response();
  std::vector<double> total(n, 0.0);
  double sum_sq_scores = 0.0;
  double quad = 0.0;
  double penalty = 0.0;
  for (std::size_t j = 0; j < design.d(); ++j) {
    const ComponentCurve combined =
      offset.empty() ? f.components[j] : add_curves(f.components[j], offset[j]);
    if (!f.components[j].is_zero())
      penalty += tuple_norm(f.components[j], design, j);
    if (combined.is_zero())
      continue;
    // (i) residual sum, (ii) per-component quadratic form, (iii) pairwise
    // cross terms as (sum_j s_ij)^2 - sum_j s_ij^2.
    const auto s = smoothed_evaluations(design, j, combined);
    for (std::size_t i = 0; i < n; ++i) {
      total[i] += s[i];
      sum_sq_scores += s[i] * s[i];
    }
    quad += quadratic_form(combined, design, j);
  }
  double loss = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double e = y[i] - total[i];
    loss += e * e;
  }
  loss -= sum_sq_scores;
  return loss / (2.0 * static_cast<double>(n)) + 0.5 * quad + cfg.lambda * penalty;
}

double
predict(const AdditiveFit& f, std::span<const double> x)
{
  if (x.size() != f.d())
    throw DataError("prediction point has " + std::to_string(x.size()) + " coordinates, expected " +
                    std::to_string(f.d()));
  for (std::size_t j = 0; j < x.size(); ++j)
    if (!(x[j] >= 0.0 && x[j] <= 1.0))
      throw DomainError("coordinate " + std::to_string(j) + " outside [0,1]");
  double out = f.intercept;
  for (std::size_t j : f.active_set)
    out += f.grid.interpolate(f.components[j].value, x[j]);
  return out;
}

std::vector<double>
predict(const AdditiveFit& f, const Matrix& x)
{
  if (x.cols() != f.d())
    throw DataError("prediction matrix has " + std::to_string(x.cols()) + " columns, expected " +
                    std::to_string(f.d()));
  for (std::size_t j = 0; j < x.cols(); ++j)
    for (std::size_t i = 0; i < x.rows(); ++i)
      if (!(x(i, j) >= 0.0 && x(i, j) <= 1.0))
        throw DomainError("coordinate " + std::to_string(j) + " of row " + std::to_string(i) +
                          " outside [0,1]");
  std::vector<double> out(x.rows(), f.intercept);
  for (std::size_t j : f.active_set) {
    const auto col = x.col(j);
    for (std::size_t i = 0; i < x.rows(); ++i)
      out[i] += f.grid.interpolate(f.components[j].value, col[i]);
  }
  return out;
}

} // namespace tlsbf
