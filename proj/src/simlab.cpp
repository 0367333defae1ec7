#include "tlsbf/simlab.hpp"

#include "tlsbf/errors.hpp"
#include "tlsbf/model_select.hpp"
#include "tlsbf/parallel.hpp"
#include "tlsbf/transfer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <mutex>
#include <numbers>
#include <ostream>
#include <sstream>

namespace tlsbf {

namespace {

std::uint64_t
derive_seed(std::uint64_t base, std::uint64_t stream)
{
  std::seed_seq seq{ static_cast<std::uint32_t>(base),
                     static_cast<std::uint32_t>(base >> 32),
                     static_cast<std::uint32_t>(stream),
                     static_cast<std::uint32_t>(stream >> 32) };
  std::uint32_t out[2];
  seq.generate(out, out + 2);
  return (static_cast<std::uint64_t>(out[0]) << 32) | out[1];
}

std::string
format_number(double v)
{
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", v);
  return buf;
}

} // namespace

void
ScenarioConfig::validate() const
{
  if (d < 13)
    throw ConfigError("scenario needs d >= 13 (the auxiliary populations use covariate 13)");
  if (n0 < 20)
    throw ConfigError("scenario needs n0 >= 20");
  if (n_aux.size() > 2)
    throw ConfigError("at most two auxiliary populations are defined");
  if (!(t >= 0.0))
    throw ConfigError("t must be nonnegative");
  if (!(delta_p >= 0.0 && delta_p <= 1.0))
    throw ConfigError("delta_p must lie in [0,1]");
  if (!(delta_f >= 0.0))
    throw ConfigError("delta_f must be nonnegative");
  if (!(noise_sd > 0.0))
    throw ConfigError("noise_sd must be positive");
  if (replications < 1)
    throw ConfigError("replications must be at least 1");
}

std::string
ScenarioConfig::id() const
{
  std::string out = "n0=" + std::to_string(n0) + ";d=" + std::to_string(d) + ";t=" + format_number(t) +
                    ";dp=" + format_number(delta_p) + ";df=" + format_number(delta_f);
  if (noise_sd != 1.0)
    out += ";sd=" + format_number(noise_sd);
  return out;
}

std::vector<ScenarioConfig>
full_scenario_grid(std::size_t n0, std::size_t replications, std::uint64_t seed)
{
  std::vector<ScenarioConfig> cells;
  for (std::size_t d : { 200, 400 })
    for (double t : { 0.1, 1.0 })
      for (double dp : { 0.1, 0.9 })
        for (double df : { 0.5, 1.0, 2.0, 3.0 }) {
          ScenarioConfig c;
          c.n0 = n0;
          c.d = d;
          c.t = t;
          c.delta_p = dp;
          c.delta_f = df;
          c.replications = replications;
          c.seed = derive_seed(seed, cells.size());
          cells.push_back(c);
        }
  return cells;
}

double
covariate_density(double x, double t)
{
  if (x < 0.0 || x > 1.0)
    return 0.0;
  if (t == 0.0)
    return 1.0;
  // S = U + tV has density (1/t) |[0,1] intersect [s - t, s]|.
  const double s = (1.0 + t) * x;
  const double overlap = std::min(1.0, s) - std::max(0.0, s - t);
  return (1.0 + t) * std::max(overlap, 0.0) / t;
}

double
TrueModel::base_function(int j, double u)
{
  constexpr double two_pi = 2.0 * std::numbers::pi;
  const double s = std::sin(two_pi * u);
  const double c = std::cos(two_pi * u);
  switch (j) {
    case 1:
      return u;
    case 2:
      return (2.0 * u - 1.0) * (2.0 * u - 1.0);
    case 3:
      return s / (2.0 - s);
    case 4:
      // The repeated sin(2 pi u) term is kept as written.
      return 0.1 * s + 0.2 * s + 0.3 * s * s + 0.4 * c * c * c + 0.5 * s * s * s;
    default:
      throw ConfigError("base function index must be 1..4");
  }
}

TrueModel::TrueModel(const ScenarioConfig& cfg, std::size_t quadrature_points)
  : delta_f_(cfg.delta_f)
{
  if (quadrature_points < 10)
    throw ConfigError("too few quadrature points");
  // Midpoint rule against the covariate density.
  const double dx = 1.0 / static_cast<double>(quadrature_points);
  double acc[4]{};
  for (std::size_t q = 0; q < quadrature_points; ++q) {
    const double x = (static_cast<double>(q) + 0.5) * dx;
    const double w = covariate_density(x, cfg.t) * dx;
    for (int j = 1; j <= 4; ++j)
      acc[j - 1] += base_function(j, x) * w;
  }
  for (int j = 0; j < 4; ++j)
    a_[j] = acc[j];
}

double
TrueModel::target(std::size_t j, double u) const
{
  // j is 1-based here.
  if (j >= 1 && j <= 4)
    return base_function(static_cast<int>(j), u) - a_[j - 1];
  if (j >= 5 && j <= 8)
    return 1.5 * target(j - 4, u);
  if (j >= 9 && j <= 12)
    return 2.0 * target(j - 8, u);
  return 0.0;
}

double
TrueModel::component(int pop, std::size_t j0, double u) const
{
  const std::size_t j = j0 + 1;
  switch (pop) {
    case 0:
      return target(j, u);
    case 1:
      if (j >= 5 && j <= 7)
        return target(j, u) + delta_f_ * target(j - 3, u);
      if (j == 8)
        return target(8, u) + delta_f_ * target(1, u);
      if (j == 13)
        return delta_f_ * (component(1, 4, u) + component(1, 5, u) + component(1, 6, u) +
                           component(1, 7, u));
      return target(j, u);
    case 2:
      if (j >= 9 && j <= 11)
        return target(j, u) + delta_f_ * target(j - 7, u);
      if (j == 12)
        return target(12, u) + delta_f_ * target(1, u);
      if (j == 13)
        return delta_f_ * (component(2, 8, u) + component(2, 9, u) + component(2, 10, u) +
                           component(2, 11, u));
      return target(j, u);
    default:
      throw ConfigError("population label must be 0, 1 or 2");
  }
}

double
TrueModel::regression(int pop, std::span<const double> x) const
{
  const std::size_t last = pop == 0 ? active_components : active_components + 1;
  double out = 0.0;
  for (std::size_t j = 0; j < std::min(last, x.size()); ++j)
    out += component(pop, j, x[j]);
  return out;
}

namespace {

// One row of target-law covariates: X_j = (U_j + tV)/(1+t).
void
draw_target_row(std::size_t d, double t, std::mt19937_64& rng, std::vector<double>& row)
{
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  row.resize(d);
  for (std::size_t j = 0; j < d; ++j)
    row[j] = unif(rng);
  const double v = unif(rng);
  for (std::size_t j = 0; j < d; ++j)
    row[j] = std::clamp((row[j] + t * v) / (1.0 + t), 0.0, 1.0);
}

} // namespace

Sample
gen_target(const ScenarioConfig& cfg, const TrueModel& model, std::mt19937_64& rng)
{
  cfg.validate();
  std::normal_distribution<double> noise(0.0, cfg.noise_sd);
  Matrix x(cfg.n0, cfg.d);
  std::vector<double> y(cfg.n0);
  std::vector<double> row;
  for (std::size_t i = 0; i < cfg.n0; ++i) {
    draw_target_row(cfg.d, cfg.t, rng, row);
    for (std::size_t j = 0; j < cfg.d; ++j)
      x(i, j) = row[j];
    y[i] = model.regression(0, row) + noise(rng);
  }
  return Sample(std::move(x), std::move(y));
}

Sample
gen_auxiliary(const ScenarioConfig& cfg, const TrueModel& model, int pop, std::mt19937_64& rng)
{
  cfg.validate();
  if (pop != 1 && pop != 2)
    throw ConfigError("auxiliary population must be 1 or 2");
  const std::size_t n = cfg.n_aux.at(static_cast<std::size_t>(pop - 1));
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::normal_distribution<double> noise(0.0, cfg.noise_sd);
  Matrix x(n, cfg.d);
  std::vector<double> y(n);
  std::vector<double> row;
  std::vector<double> copy;
  for (std::size_t i = 0; i < n; ++i) {
    draw_target_row(cfg.d, cfg.t, rng, row);
    draw_target_row(cfg.d, cfg.t, rng, copy);
    const double w = unif(rng);
    if (w > 1.0 - cfg.delta_p)
      for (std::size_t j = 0; j < cfg.d; ++j)
        row[j] = 0.5 * (row[j] + copy[j]);
    for (std::size_t j = 0; j < cfg.d; ++j)
      x(i, j) = row[j];
    y[i] = model.regression(pop, row) + noise(rng);
  }
  return Sample(std::move(x), std::move(y));
}

MiseEvaluator::MiseEvaluator(const TrueModel& model,
                             const ScenarioConfig& cfg,
                             std::size_t mc_size,
                             std::uint64_t seed)
  : model_(model)
  , d_(cfg.d)
  , t_(cfg.t)
  , mc_size_(mc_size)
  , seed_(seed)
{
  if (mc_size < 1000)
    throw ConfigError("MISE needs at least 1000 Monte-Carlo draws");
  std::mt19937_64 rng(derive_seed(seed_, 0));
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  v_.resize(mc_size_);
  for (double& v : v_)
    v = unif(rng);
}

std::vector<double>
MiseEvaluator::column(std::size_t j) const
{
  std::mt19937_64 rng(derive_seed(seed_, j + 1));
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::vector<double> out(mc_size_);
  for (std::size_t i = 0; i < mc_size_; ++i)
    out[i] = std::clamp((unif(rng) + t_ * v_[i]) / (1.0 + t_), 0.0, 1.0);
  return out;
}

MiseResult
MiseEvaluator::operator()(const AdditiveFit& estimate) const
{
  if (estimate.d() != d_)
    throw DataError("estimate dimension does not match the scenario");
  std::vector<std::size_t> columns(estimate.active_set.begin(), estimate.active_set.end());
  for (std::size_t j = 0; j < TrueModel::active_components; ++j)
    columns.push_back(j);
  std::sort(columns.begin(), columns.end());
  columns.erase(std::unique(columns.begin(), columns.end()), columns.end());

  // The target regression has mean zero.
  std::vector<double> err(mc_size_, estimate.intercept);
  for (std::size_t j : columns) {
    const auto x = column(j);
    const bool fitted = !estimate.components[j].is_zero();
    const bool truth = j < TrueModel::active_components;
    for (std::size_t i = 0; i < mc_size_; ++i) {
      double e = 0.0;
      if (fitted)
        e += estimate.grid.interpolate(estimate.components[j].value, x[i]);
      if (truth)
        e -= model_.component(0, j, x[i]);
      err[i] += e;
    }
  }
  double sum = 0.0;
  double sum_sq = 0.0;
  for (double e : err) {
    const double s = e * e;
    sum += s;
    sum_sq += s * s;
  }
  const double m = static_cast<double>(mc_size_);
  const double mean = sum / m;
  const double var = std::max(0.0, (sum_sq / m - mean * mean) * m / (m - 1.0));
  return { mean, std::sqrt(var / m) };
}

MiseResult
mise(const AdditiveFit& estimate,
     const TrueModel& model,
     const ScenarioConfig& cfg,
     std::uint64_t seed,
     std::size_t mc_size)
{
  return MiseEvaluator(model, cfg, mc_size, seed)(estimate);
}

std::string_view
method_name(Method m)
{
  switch (m) {
    case Method::nw:
      return "NW";
    case Method::ll:
      return "LL";
    case Method::tl:
      return "TL";
  }
  return "?";
}

Method
parse_method(std::string_view name)
{
  if (name == "NW" || name == "nw")
    return Method::nw;
  if (name == "LL" || name == "ll")
    return Method::ll;
  if (name == "TL" || name == "tl")
    return Method::tl;
  throw ConfigError("unknown method '" + std::string(name) + "' (expected NW, LL or TL)");
}

std::uint64_t
replication_seed(std::uint64_t seed, std::size_t rep)
{
  return derive_seed(seed, rep);
}

void
write_row_csv(std::ostream& out, const ReplicationRow& row)
{
  std::string status = row.status;
  std::replace(status.begin(), status.end(), ',', ';');
  std::replace(status.begin(), status.end(), '\n', ' ');
  char mise_buf[40];
  char se_buf[40];
  std::snprintf(mise_buf, sizeof mise_buf, "%.10g", row.mise);
  std::snprintf(se_buf, sizeof se_buf, "%.10g", row.mc_se);
  out << row.cell << ',' << method_name(row.method) << ',' << row.rep << ',' << row.seed << ','
      << mise_buf << ',' << se_buf << ',';
  if (row.runtime_s) {
    char rt[32];
    std::snprintf(rt, sizeof rt, "%.3f", *row.runtime_s);
    out << rt;
  } else {
    out << "NA";
  }
  out << ',' << status << '\n';
}

namespace {

struct Job
{
  const ScenarioConfig* cell;
  std::size_t rep;
};

AdditiveFit
fit_method(Method method,
           const Sample& target,
           const std::vector<LabeledSample>& auxiliaries,
           const ExperimentOptions& options)
{
  const auto target_bw = widen_until_conditioned(target, rot_bandwidth(target).bandwidths, options.fit);
  const double sd_y = sample_sd(target.y());
  switch (method) {
    case Method::nw:
    case Method::ll: {
      FitConfig cfg = options.fit;
      cfg.mode = method == Method::nw ? SmootherMode::nadaraya_watson : SmootherMode::local_linear;
      return select_lambda(target, target_bw, LambdaGrid::log_spaced(sd_y, options.lambda_grid_size), cfg)
        .fit;
    }
    case Method::tl: {
      MultiSampleSet data(target, auxiliaries);
      TLConfig cfg;
      cfg.inner = options.fit;
      cfg.inner.mode = SmootherMode::local_linear;
      cfg.include_target_in_pool = true;
      cfg.bw_target = target_bw;
      const auto pool = data.pool(true);
      cfg.bw_pooled = widen_until_conditioned(pool, rot_bandwidth(pool).bandwidths, cfg.inner);
      // Scale of the first-stage grid: spread of the pooled centred responses.
      std::vector<double> pooled_centered;
      for (const Sample& s : data.pool(true)) {
        const double m = s.mean_y();
        for (double y : s.y())
          pooled_centered.push_back(y - m);
      }
      const auto grid1 = LambdaGrid::log_spaced(sample_sd(pooled_centered), options.pair_grid_size);
      const auto grid2 = LambdaGrid::log_spaced(sd_y, options.pair_grid_size);
      return select_lambda_pair(data, cfg, grid1, grid2).fit.final;
    }
  }
  throw ConfigError("unknown method");
}

std::vector<ReplicationRow>
run_job(const Job& job, const ExperimentOptions& options)
{
  const ScenarioConfig& cell = *job.cell;
  const std::uint64_t seed = replication_seed(cell.seed, job.rep);
  std::vector<ReplicationRow> rows;
  auto blank_row = [&](Method m) {
    ReplicationRow row;
    row.cell = cell.id();
    row.method = m;
    row.rep = job.rep;
    row.seed = seed;
    return row;
  };
  try {
    const TrueModel model(cell, options.quadrature_points);
    std::mt19937_64 rng(derive_seed(seed, 1));
    const Sample target = gen_target(cell, model, rng);
    std::vector<LabeledSample> auxiliaries;
    for (std::size_t a = 0; a < cell.n_aux.size(); ++a)
      auxiliaries.push_back({ "aux" + std::to_string(a + 1),
                              gen_auxiliary(cell, model, static_cast<int>(a + 1), rng) });
    const MiseEvaluator evaluator(model, cell, options.mc_size, derive_seed(seed, 2));

    for (Method m : options.methods) {
      ReplicationRow row = blank_row(m);
      const auto start = std::chrono::steady_clock::now();
      try {
        const AdditiveFit f = fit_method(m, target, auxiliaries, options);
        const auto r = evaluator(f);
        row.mise = r.value;
        row.mc_se = r.std_error;
        row.active = f.active_set.size();
      } catch (const Error& e) {
        row.mise = std::nan("");
        row.mc_se = std::nan("");
        row.status = std::string("error: ") + e.what();
      }
      if (options.timing)
        row.runtime_s =
          std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
      rows.push_back(std::move(row));
    }
  } catch (const Error& e) {
    rows.clear();
    for (Method m : options.methods) {
      ReplicationRow row = blank_row(m);
      row.mise = std::nan("");
      row.mc_se = std::nan("");
      row.status = std::string("error: ") + e.what();
      rows.push_back(std::move(row));
    }
  }
  return rows;
}

} // namespace

std::vector<ReplicationRow>
run_experiment(std::span<const ScenarioConfig> cells, const ExperimentOptions& options, std::ostream* out)
{
  std::vector<Job> jobs;
  for (const auto& cell : cells) {
    cell.validate();
    for (std::size_t rep = 0; rep < cell.replications; ++rep)
      jobs.push_back({ &cell, rep });
  }
  if (options.methods.empty())
    throw ConfigError("no methods selected");

  if (out != nullptr)
    *out << replication_csv_header << '\n';

  std::vector<std::vector<ReplicationRow>> results(jobs.size());
  std::vector<bool> done(jobs.size(), false);
  std::size_t flushed = 0;
  std::mutex mutex;
  parallel_for(jobs.size(), options.threads, [&](std::size_t k) {
    auto rows = run_job(jobs[k], options);
    std::lock_guard lock(mutex);
    results[k] = std::move(rows);
    done[k] = true;
    // Emit every completed job in order so the table is independent of
    // scheduling.
    while (flushed < jobs.size() && done[flushed]) {
      if (out != nullptr) {
        for (const auto& row : results[flushed])
          write_row_csv(*out, row);
        out->flush();
      }
      ++flushed;
    }
  });

  std::vector<ReplicationRow> all;
  for (auto& rows : results)
    for (auto& row : rows)
      all.push_back(std::move(row));
  return all;
}

} // namespace tlsbf
