#include "tlsbf/kernel.hpp"

#include "tlsbf/errors.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

namespace tlsbf {

KernelKind
parse_kernel(std::string_view name)
{
  if (name == "epanechnikov")
    return KernelKind::epanechnikov;
  if (name == "quartic")
    return KernelKind::quartic;
  throw ConfigError("unknown kernel '" + std::string(name) + "'");
}

std::string_view
kernel_name(KernelKind kind)
{
  return kind == KernelKind::epanechnikov ? "epanechnikov" : "quartic";
}

double
BaselineKernel::operator()(double u) const
{
  if (std::abs(u) > 1.0)
    return 0.0;
  const double s = 1.0 - u * u;
  switch (kind_) {
    case KernelKind::epanechnikov:
      return 0.75 * s;
    case KernelKind::quartic:
      return 15.0 / 16.0 * s * s;
  }
  return 0.0;
}

namespace {

// Antiderivative of v^ell k(v).
double
moment_antiderivative(KernelKind kind, int ell, double v)
{
  auto term = [&](int power) { return std::pow(v, power) / power; };
  switch (kind) {
    case KernelKind::epanechnikov:
      return 0.75 * (term(ell + 1) - term(ell + 3));
    case KernelKind::quartic:
      return 15.0 / 16.0 * (term(ell + 1) - 2.0 * term(ell + 3) + term(ell + 5));
  }
  return 0.0;
}

} // namespace

double
BaselineKernel::partial_moment(int ell, double a, double b) const
{
  a = std::clamp(a, -1.0, 1.0);
  b = std::clamp(b, -1.0, 1.0);
  if (b <= a)
    return 0.0;
  return moment_antiderivative(kind_, ell, b) - moment_antiderivative(kind_, ell, a);
}

EvalGrid::EvalGrid(std::size_t size)
{
  if (size < 2)
    throw ConfigError("evaluation grid needs at least two points");
  spacing_ = 1.0 / static_cast<double>(size - 1);
  points_.resize(size);
  for (std::size_t g = 0; g < size; ++g)
    points_[g] = static_cast<double>(g) * spacing_;
  points_.back() = 1.0;
}

double
EvalGrid::integrate(std::span<const double> values) const
{
  double total = 0.0;
  for (std::size_t g = 0; g < values.size(); ++g)
    total += weight(g) * values[g];
  return total;
}

std::pair<std::size_t, double>
EvalGrid::locate(double x) const
{
  const double pos = x / spacing_;
  auto idx = static_cast<std::size_t>(std::floor(pos));
  if (idx >= size() - 1)
    idx = size() - 2;
  return { idx, pos - static_cast<double>(idx) };
}

double
EvalGrid::interpolate(std::span<const double> values, double x) const
{
  const auto [idx, frac] = locate(x);
  if (frac == 0.0)
    return values[idx];
  return values[idx] + frac * (values[idx + 1] - values[idx]);
}

Bandwidths::Bandwidths(std::vector<double> per_covariate)
  : Bandwidths(per_covariate, [&] {
      if (per_covariate.empty())
        return 0.0;
      double log_sum = 0.0;
      for (double h : per_covariate)
        log_sum += std::log(h);
      return std::exp(log_sum / static_cast<double>(per_covariate.size()));
    }())
{}

Bandwidths::Bandwidths(std::vector<double> per_covariate, double reference)
  : per_covariate_(std::move(per_covariate))
  , reference_(reference)
{
  for (double h : per_covariate_)
    validate_bandwidth(h);
  if (!per_covariate_.empty()) {
    if (!(reference_ > 0.0))
      throw InvalidBandwidth("reference bandwidth must be positive");
    const auto [lo, hi] = std::minmax_element(per_covariate_.begin(), per_covariate_.end());
    lower_ratio_ = *lo / reference_;
    upper_ratio_ = *hi / reference_;
  }
}

Bandwidths
Bandwidths::constant(std::size_t d, double h)
{
  return Bandwidths(std::vector<double>(d, h), h);
}

void
validate_bandwidth(double h)
{
  if (!(h > 0.0) || h > 0.5)
    throw InvalidBandwidth("bandwidth " + std::to_string(h) + " outside (0, 0.5]");
}

double
normalized_weight(double u, double v, double h, const BaselineKernel& kernel)
{
  validate_bandwidth(h);
  const double mass = kernel.partial_moment(0, -v / h, (1.0 - v) / h);
  return kernel((u - v) / h) / h / mass;
}

WeightField::WeightField(std::span<const double> samples,
                         const EvalGrid& grid,
                         double h,
                         const BaselineKernel& kernel,
                         Normalization normalization)
  : x_(samples.begin(), samples.end())
  , grid_size_(grid.size())
  , h_(h)
{
  validate_bandwidth(h);
  if (x_.empty())
    throw DataError("weight field needs at least one sample");
  if (h < grid.spacing())
    throw InvalidBandwidth("bandwidth " + std::to_string(h) + " is below the grid spacing " +
                           std::to_string(grid.spacing()));
  for (std::size_t i = 0; i < x_.size(); ++i) {
    if (!(x_[i] >= 0.0 && x_[i] <= 1.0))
      throw DomainError("sample " + std::to_string(i) + " value " + std::to_string(x_[i]) +
                        " outside [0,1]");
  }

  const double dx = grid.spacing();
  const auto last = static_cast<long>(grid.size()) - 1;
  first_.resize(x_.size());
  offsets_.resize(x_.size() + 1);
  offsets_[0] = 0;
  values_.reserve(x_.size() * static_cast<std::size_t>(2.0 * h / dx + 3.0));

  for (std::size_t i = 0; i < x_.size(); ++i) {
    const double v = x_[i];
    const long lo = std::max(0L, static_cast<long>(std::ceil((v - h) / dx - 1e-12)));
    const long hi = std::min(last, static_cast<long>(std::floor((v + h) / dx + 1e-12)));
    const std::size_t start = values_.size();
    double denom = 0.0;
    for (long g = lo; g <= hi; ++g) {
      const double kv = kernel((grid[static_cast<std::size_t>(g)] - v) / h) / h;
      values_.push_back(kv);
      denom += grid.weight(static_cast<std::size_t>(g)) * kv;
    }
    if (normalization == Normalization::analytic)
      denom = kernel.partial_moment(0, -v / h, (1.0 - v) / h);
    for (std::size_t idx = start; idx < values_.size(); ++idx)
      values_[idx] /= denom;
    first_[i] = static_cast<std::size_t>(lo);
    offsets_[i + 1] = values_.size();
  }
}

double
WeightField::operator()(std::size_t g, std::size_t i) const
{
  const auto b = band(i);
  if (g < first_[i] || g >= first_[i] + b.size())
    return 0.0;
  return b[g - first_[i]];
}

std::vector<KernelMoments>
kernel_moments(const EvalGrid& grid, double h, const BaselineKernel& kernel)
{
  validate_bandwidth(h);
  std::vector<KernelMoments> out(grid.size());
  for (std::size_t g = 0; g < grid.size(); ++g) {
    const double a = -grid[g] / h;
    const double b = (1.0 - grid[g]) / h;
    const double mass = kernel.partial_moment(0, a, b);
    out[g] = { kernel.partial_moment(0, a, b) / mass,
               kernel.partial_moment(1, a, b) / mass,
               kernel.partial_moment(2, a, b) / mass };
  }
  return out;
}

} // namespace tlsbf
