#include "tlsbf/transfer.hpp"

#include "tlsbf/errors.hpp"
#include "tlsbf/model_select.hpp"
#include "tlsbf/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <string>

namespace tlsbf {

MultiSampleSet::MultiSampleSet(Sample target, std::vector<LabeledSample> auxiliaries)
  : target_(std::move(target))
  , auxiliaries_(std::move(auxiliaries))
{
  for (const auto& aux : auxiliaries_)
    if (aux.sample.d() != target_.d())
      throw DataError("auxiliary sample '" + aux.label + "' has " +
                      std::to_string(aux.sample.d()) + " covariates, target has " +
                      std::to_string(target_.d()));
}

std::vector<double>
MultiSampleSet::weights() const
{
  double total = 0.0;
  for (const auto& aux : auxiliaries_)
    total += static_cast<double>(aux.sample.n());
  std::vector<double> w;
  w.reserve(auxiliaries_.size());
  for (const auto& aux : auxiliaries_)
    w.push_back(static_cast<double>(aux.sample.n()) / total);
  return w;
}

std::vector<std::reference_wrapper<const Sample>>
MultiSampleSet::pool(bool include_target) const
{
  std::vector<std::reference_wrapper<const Sample>> out;
  if (include_target)
    out.emplace_back(target_);
  for (const auto& aux : auxiliaries_)
    out.emplace_back(aux.sample);
  if (out.empty())
    throw DataError("the first-stage pool is empty: no auxiliaries and the target is excluded");
  return out;
}

DesignField
make_pooled_design(const MultiSampleSet& data, const TLConfig& cfg)
{
  const auto pool = data.pool(cfg.include_target_in_pool);
  return DesignField(pool,
                     cfg.bw_pooled,
                     EvalGrid(cfg.inner.grid_size),
                     BaselineKernel(cfg.inner.kernel),
                     cfg.inner.mode,
                     cfg.inner.ridge_floor);
}

DesignField
make_target_design(const MultiSampleSet& data, const TLConfig& cfg)
{
  return make_design(data.target(), cfg.bw_target, cfg.inner);
}

AdditiveFit
pooled_fit(const DesignField& pooled_design, const TLConfig& cfg)
{
  FitConfig inner = cfg.inner;
  inner.lambda = cfg.lambda1;
  return fit(pooled_design, inner);
}

AdditiveFit
pooled_fit(const MultiSampleSet& data, const TLConfig& cfg)
{
  return pooled_fit(make_pooled_design(data, cfg), cfg);
}

std::vector<ComponentCurve>
center_to_target(const AdditiveFit& pooled, const DesignField& target_design)
{
  if (pooled.d() != target_design.d())
    throw DataError("pooled fit and target design disagree on the number of covariates");
  if (!(pooled.grid == target_design.grid()))
    throw DataError("pooled fit and target design use different grids");
  std::vector<ComponentCurve> out;
  out.reserve(pooled.d());
  for (std::size_t j = 0; j < pooled.d(); ++j) {
    const ComponentCurve& c = pooled.components[j];
    if (c.is_zero()) {
      out.push_back(c);
      continue;
    }
    ComponentCurve centered = c;
    const double shift = pi00_constant(c, target_design, j);
    for (double& v : centered.value)
      v -= shift;
    out.push_back(std::move(centered));
  }
  return out;
}

AdditiveFit
debias_fit(const DesignField& target_design,
           std::span<const ComponentCurve> centered_offset,
           const TLConfig& cfg)
{
  FitConfig inner = cfg.inner;
  inner.lambda = cfg.lambda2;
  return fit(target_design, inner, centered_offset);
}

AdditiveFit
debias_fit(const MultiSampleSet& data,
           std::span<const ComponentCurve> centered_offset,
           const TLConfig& cfg)
{
  return debias_fit(make_target_design(data, cfg), centered_offset, cfg);
}

AdditiveFit
combine_fits(std::span<const ComponentCurve> centered_offset,
             const AdditiveFit& correction,
             double target_intercept)
{
  if (centered_offset.size() != correction.d())
    throw DataError("offset and correction disagree on the number of covariates");
  AdditiveFit out = correction;
  out.intercept = target_intercept;
  for (std::size_t j = 0; j < out.d(); ++j) {
    auto& c = out.components[j];
    const auto& o = centered_offset[j];
    for (std::size_t g = 0; g < c.size(); ++g) {
      c.value[g] += o.value[g];
      c.deriv[g] += o.deriv[g];
    }
  }
  out.refresh_active_set();
  return out;
}

TLFit
tl_fit(const MultiSampleSet& data, const TLConfig& cfg)
{
  const DesignField target_design = make_target_design(data, cfg);
  TLFit out;
  out.pooled = pooled_fit(data, cfg);
  const auto centered = center_to_target(out.pooled, target_design);
  out.correction = debias_fit(target_design, centered, cfg);
  out.final = combine_fits(centered, out.correction, data.target().mean_y());
  return out;
}

namespace {

constexpr std::size_t min_candidate_size = 10;

LambdaGrid
lambda_grid_for(const DesignField& design, std::size_t count)
{
  return LambdaGrid::log_spaced(sample_sd(design.centered_response()), count);
}

double
mean_abs_difference(const AdditiveFit& a, const AdditiveFit& b, const Matrix& x)
{
  const auto pa = predict(a, x);
  const auto pb = predict(b, x);
  double total = 0.0;
  for (std::size_t i = 0; i < pa.size(); ++i)
    total += std::abs(pa[i] - pb[i]);
  return total / static_cast<double>(pa.size());
}

} // namespace

std::vector<SourceScore>
detect_sources(const Sample& target, std::span<const LabeledSample> candidates, const DetectionConfig& cfg)
{
  if (!(cfg.c_sd > 0.0))
    throw ConfigError("c_sd must be positive");
  if (cfg.n_splits < 1)
    throw ConfigError("n_splits must be at least 1");
  for (const auto& c : candidates) {
    if (c.sample.n() < min_candidate_size)
      throw DataError("candidate '" + c.label + "' has " + std::to_string(c.sample.n()) +
                      " observations; at least " + std::to_string(min_candidate_size) +
                      " are required");
    if (c.sample.d() != target.d())
      throw DataError("candidate '" + c.label + "' has a different number of covariates");
  }
  const std::size_t half = target.n() / 2;
  if (half < 2)
    throw DataError("target sample too small to split");

  const double n0 = static_cast<double>(target.n());
  std::vector<double> totals(candidates.size(), 0.0);

  for (int split = 0; split < cfg.n_splits; ++split) {
    std::seed_seq seq{ static_cast<std::uint32_t>(cfg.seed),
                       static_cast<std::uint32_t>(cfg.seed >> 32),
                       static_cast<std::uint32_t>(split) };
    std::mt19937_64 rng(seq);
    std::vector<std::size_t> perm(target.n());
    std::iota(perm.begin(), perm.end(), std::size_t{ 0 });
    std::shuffle(perm.begin(), perm.end(), rng);
    // Odd n: the last shuffled observation is dropped.
    const std::vector<std::size_t> halves[2] = {
      { perm.begin(), perm.begin() + static_cast<long>(half) },
      { perm.begin() + static_cast<long>(half), perm.begin() + static_cast<long>(2 * half) },
    };

    for (int r = 0; r < 2; ++r) {
      // The fits for half r use the complementary half, and the loss is
      // evaluated at that half's covariates.
      const Sample train = target.subset(halves[1 - r]);
      const Matrix& eval_x = train.x();

      const auto target_bw = widen_until_conditioned(train, rot_bandwidth(train, n0).bandwidths, cfg.inner);
      const DesignField target_design = make_design(train, target_bw, cfg.inner);
      const AdditiveFit target_only =
        select_lambda(target_design, lambda_grid_for(target_design, cfg.lambda_grid_size), cfg.inner)
          .fit;

      std::vector<double> scores(candidates.size());
      parallel_for(candidates.size(), cfg.threads, [&](std::size_t b) {
        const std::reference_wrapper<const Sample> pool[] = { std::cref(train),
                                                              std::cref(candidates[b].sample) };
        const double n_eff = n0 + 2.0 * static_cast<double>(candidates[b].sample.n());
        const auto pooled_bw = widen_until_conditioned(pool, rot_bandwidth(pool, n_eff).bandwidths, cfg.inner);
        const DesignField pooled_design(pool,
                                        pooled_bw,
                                        EvalGrid(cfg.inner.grid_size),
                                        BaselineKernel(cfg.inner.kernel),
                                        cfg.inner.mode,
                                        cfg.inner.ridge_floor);
        AdditiveFit pooled =
          select_lambda(pooled_design, lambda_grid_for(pooled_design, cfg.lambda_grid_size), cfg.inner)
            .fit;
        // Compare component sums only; the candidate's own mean is not part
        // of the target regression function.
        pooled.intercept = train.mean_y();
        scores[b] = mean_abs_difference(pooled, target_only, eval_x);
      });
      for (std::size_t b = 0; b < candidates.size(); ++b)
        totals[b] += scores[b];
    }
  }

  std::vector<SourceScore> out;
  out.reserve(candidates.size());
  for (std::size_t b = 0; b < candidates.size(); ++b) {
    const double score = totals[b] / (2.0 * cfg.n_splits);
    out.push_back({ candidates[b].label, score, score < cfg.c_sd / 4.0 });
  }
  return out;
}

} // namespace tlsbf
