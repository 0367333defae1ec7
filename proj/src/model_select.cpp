#include "tlsbf/model_select.hpp"

#include "tlsbf/errors.hpp"
#include "tlsbf/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <string>

namespace tlsbf {

RuleOfThumb
rot_bandwidth(std::span<const std::reference_wrapper<const Sample>> samples, double n_effective)
{
  if (samples.empty())
    throw DataError("rule-of-thumb bandwidth needs at least one sample");
  const std::size_t d = samples.front().get().d();
  std::size_t n = 0;
  for (const Sample& s : samples)
    n += s.n();
  if (n < 10)
    throw DataError("rule-of-thumb bandwidth needs at least 10 observations");
  const double rate = std::pow(n_effective > 0.0 ? n_effective : static_cast<double>(n), -0.2);

  RuleOfThumb out;
  std::vector<double> h(d);
  std::vector<double> column;
  column.reserve(n);
  for (std::size_t j = 0; j < d; ++j) {
    column.clear();
    for (const Sample& s : samples)
      for (double v : s.x().col(j))
        column.push_back(v);
    const double sd = sample_sd(column);
    // Rounding in the mean leaves a tiny spread for constant columns.
    if (sd <= 1e-12)
      out.constant_columns.push_back(j);
    h[j] = std::clamp(rot_constant * sd * rate, rot_min_bandwidth, rot_max_bandwidth);
  }
  out.bandwidths = Bandwidths(std::move(h));
  return out;
}

RuleOfThumb
rot_bandwidth(const Sample& sample, double n_effective)
{
  const std::reference_wrapper<const Sample> one[] = { std::cref(sample) };
  return rot_bandwidth(one, n_effective);
}

double
min_design_eigenvalue(std::span<const double> column, double h, const FitConfig& cfg)
{
  const EvalGrid grid(cfg.grid_size);
  const WeightField w(column, grid, h, BaselineKernel(cfg.kernel));
  const bool ll = cfg.mode == SmootherMode::local_linear;
  std::vector<Sym2> M(grid.size());
  for (std::size_t i = 0; i < w.samples(); ++i) {
    const auto band = w.band(i);
    for (std::size_t b = 0; b < band.size(); ++b) {
      const std::size_t g = w.first(i) + b;
      const double t = (w.sample(i) - grid[g]) / h;
      M[g].xx += band[b];
      M[g].xy += band[b] * t;
      M[g].yy += band[b] * t * t;
    }
  }
  const double n = static_cast<double>(w.samples());
  double out = std::numeric_limits<double>::infinity();
  for (auto& m : M) {
    m.xx /= n;
    m.xy /= n;
    m.yy /= n;
    out = std::min(out, ll ? m.min_eigenvalue() : m.xx);
  }
  return out;
}

Bandwidths
widen_until_conditioned(std::span<const std::reference_wrapper<const Sample>> samples,
                        const Bandwidths& bandwidths,
                        const FitConfig& cfg,
                        std::vector<std::string>* warnings)
{
  std::size_t n = 0;
  for (const Sample& s : samples)
    n += s.n();
  if (n < singular_check_min_n)
    return bandwidths;
  std::vector<double> h(bandwidths.values().begin(), bandwidths.values().end());
  bool changed = false;
  std::vector<double> column;
  for (std::size_t j = 0; j < h.size(); ++j) {
    column.clear();
    for (const Sample& s : samples)
      for (double v : s.x().col(j))
        column.push_back(v);
    const double start = h[j];
    while (min_design_eigenvalue(column, h[j], cfg) < singular_threshold && h[j] < rot_max_bandwidth)
      h[j] = std::min(rot_max_bandwidth, 1.25 * h[j]);
    if (warnings != nullptr && min_design_eigenvalue(column, h[j], cfg) < singular_threshold)
      warnings->push_back("covariate " + std::to_string(j) +
                          " stays ill-conditioned at the maximum bandwidth");
    if (h[j] != start) {
      changed = true;
      if (warnings != nullptr)
        warnings->push_back("bandwidth of covariate " + std::to_string(j) + " widened from " +
                            std::to_string(start) + " to " + std::to_string(h[j]) +
                            " for a well-conditioned design");
    }
  }
  return changed ? Bandwidths(std::move(h)) : bandwidths;
}

Bandwidths
widen_until_conditioned(const Sample& sample,
                        const Bandwidths& bandwidths,
                        const FitConfig& cfg,
                        std::vector<std::string>* warnings)
{
  const std::reference_wrapper<const Sample> one[] = { std::cref(sample) };
  return widen_until_conditioned(one, bandwidths, cfg, warnings);
}

LambdaGrid::LambdaGrid(std::vector<double> values)
  : values_(std::move(values))
{
  if (values_.empty())
    throw ConfigError("lambda grid is empty");
  for (std::size_t k = 0; k < values_.size(); ++k) {
    if (!(values_[k] > 0.0) || !std::isfinite(values_[k]))
      throw ConfigError("lambda grid values must be positive and finite");
    if (k > 0 && !(values_[k] > values_[k - 1]))
      throw ConfigError("lambda grid must be strictly increasing");
  }
}

LambdaGrid
LambdaGrid::log_spaced(double scale, std::size_t count, double lo, double hi)
{
  if (!(scale > 0.0))
    throw ConfigError("lambda grid scale must be positive");
  if (count == 0)
    throw ConfigError("lambda grid needs at least one value");
  std::vector<double> v(count);
  if (count == 1) {
    v[0] = scale * hi;
  } else {
    const double step = std::log(hi / lo) / static_cast<double>(count - 1);
    for (std::size_t k = 0; k < count; ++k)
      v[k] = scale * lo * std::exp(step * static_cast<double>(k));
  }
  return LambdaGrid(std::move(v));
}

namespace {

BicScore
bic_from_residuals(double rss, std::size_t n, const AdditiveFit& f)
{
  double penalty = 0.0;
  for (std::size_t j : f.active_set) {
    const double nh = static_cast<double>(n) * f.bandwidths[j];
    penalty += std::log(nh) / nh;
  }
  if (rss == 0.0)
    return { -std::numeric_limits<double>::infinity(), true };
  return { std::log(rss / (2.0 * static_cast<double>(n))) + penalty, false };
}

} // namespace

BicScore
bic_score(const Sample& sample, const AdditiveFit& f)
{
  const auto pred = predict(f, sample.x());
  double rss = 0.0;
  for (std::size_t i = 0; i < sample.n(); ++i) {
    const double e = sample.y()[i] - pred[i];
    rss += e * e;
  }
  return bic_from_residuals(rss, sample.n(), f);
}

BicScore
bic_score(const DesignField& design, const AdditiveFit& f)
{
  std::vector<double> residual(design.centered_response().begin(), design.centered_response().end());
  for (std::size_t j : f.active_set) {
    const auto x = design.weights(j).sample_values();
    for (std::size_t i = 0; i < residual.size(); ++i)
      residual[i] -= f.grid.interpolate(f.components[j].value, x[i]);
  }
  double rss = 0.0;
  for (double e : residual)
    rss += e * e;
  return bic_from_residuals(rss, design.n(), f);
}

namespace {

// Index of the minimum finite-or-degenerate score; ties resolve to the
// later (larger lambda) entry.
std::optional<std::size_t>
argmin_prefer_last(const std::vector<double>& scores)
{
  std::optional<std::size_t> best;
  for (std::size_t k = 0; k < scores.size(); ++k) {
    if (std::isnan(scores[k]))
      continue;
    if (!best || scores[k] <= scores[*best])
      best = k;
  }
  return best;
}

} // namespace

LambdaSelection
select_lambda(const DesignField& design, const LambdaGrid& grid, const FitConfig& cfg, std::size_t threads)
{
  std::vector<std::optional<AdditiveFit>> fits(grid.size());
  std::vector<double> scores(grid.size(), std::numeric_limits<double>::quiet_NaN());
  std::vector<std::string> errors(grid.size());
  parallel_for(grid.size(), threads, [&](std::size_t k) {
    FitConfig local = cfg;
    local.lambda = grid[k];
    try {
      fits[k] = fit(design, local);
      scores[k] = bic_score(design, *fits[k]).value;
    } catch (const Error& e) {
      errors[k] = e.what();
    }
  });

  LambdaSelection out;
  for (std::size_t k = 0; k < grid.size(); ++k)
    if (!errors[k].empty())
      out.warnings.push_back("lambda=" + std::to_string(grid[k]) + " skipped: " + errors[k]);
  const auto best = argmin_prefer_last(scores);
  if (!best)
    throw Error("every lambda in the grid failed" +
                (out.warnings.empty() ? std::string() : ": " + out.warnings.front()));
  out.lambda = grid[*best];
  out.fit = std::move(*fits[*best]);
  out.scores = std::move(scores);
  return out;
}

LambdaSelection
select_lambda(const Sample& sample,
              const Bandwidths& bandwidths,
              const LambdaGrid& grid,
              const FitConfig& cfg,
              std::size_t threads)
{
  return select_lambda(make_design(sample, bandwidths, cfg), grid, cfg, threads);
}

PairSelection
select_lambda_pair(const MultiSampleSet& data,
                   const TLConfig& base,
                   const LambdaGrid& grid1,
                   const LambdaGrid& grid2,
                   bool cache_step1,
                   std::size_t threads)
{
  const DesignField pooled_design = make_pooled_design(data, base);
  const DesignField target_design = make_target_design(data, base);
  const double target_mean = data.target().mean_y();
  const std::size_t n1 = grid1.size();
  const std::size_t n2 = grid2.size();

  std::vector<std::optional<AdditiveFit>> step1(n1);
  std::vector<std::string> step1_errors(n1);
  auto run_step1 = [&](std::size_t a) {
    TLConfig cfg = base;
    cfg.lambda1 = grid1[a];
    return pooled_fit(pooled_design, cfg);
  };
  if (cache_step1) {
    parallel_for(n1, threads, [&](std::size_t a) {
      try {
        step1[a] = run_step1(a);
      } catch (const Error& e) {
        step1_errors[a] = e.what();
      }
    });
  }

  std::vector<std::optional<TLFit>> fits(n1 * n2);
  std::vector<double> scores(n1 * n2, std::numeric_limits<double>::quiet_NaN());
  std::vector<std::string> errors(n1 * n2);
  parallel_for(n1 * n2, threads, [&](std::size_t idx) {
    const std::size_t a = idx / n2;
    const std::size_t b = idx % n2;
    try {
      TLFit result;
      if (cache_step1) {
        if (!step1[a]) {
          errors[idx] = step1_errors[a];
          return;
        }
        result.pooled = *step1[a];
      } else {
        result.pooled = run_step1(a);
      }
      TLConfig cfg = base;
      cfg.lambda1 = grid1[a];
      cfg.lambda2 = grid2[b];
      const auto centered = center_to_target(result.pooled, target_design);
      result.correction = debias_fit(target_design, centered, cfg);
      result.final = combine_fits(centered, result.correction, target_mean);
      scores[idx] = bic_score(data.target(), result.final).value;
      fits[idx] = std::move(result);
    } catch (const Error& e) {
      errors[idx] = e.what();
    }
  });

  PairSelection out;
  for (std::size_t idx = 0; idx < n1 * n2; ++idx)
    if (!errors[idx].empty())
      out.warnings.push_back("lambda pair (" + std::to_string(grid1[idx / n2]) + ", " +
                             std::to_string(grid2[idx % n2]) + ") skipped: " + errors[idx]);

  // Row-major order puts larger lambda2 later within a row and larger lambda1
  // in later rows, so "prefer last" breaks ties toward larger penalties.
  const auto best = argmin_prefer_last(scores);
  if (!best)
    throw Error("every lambda pair failed" +
                (out.warnings.empty() ? std::string() : ": " + out.warnings.front()));
  out.lambda1 = grid1[*best / n2];
  out.lambda2 = grid2[*best % n2];
  out.fit = std::move(*fits[*best]);
  out.scores = std::move(scores);
  return out;
}

} // namespace tlsbf
