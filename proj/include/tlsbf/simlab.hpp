#pragma once

#include "tlsbf/backfit.hpp"
#include "tlsbf/sample.hpp"

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

namespace tlsbf {

//! One simulation cell.
struct ScenarioConfig
{
  std::size_t n0 = 100;
  std::vector<std::size_t> n_aux{ 200, 200 };
  std::size_t d = 100;
  double t = 0.1;
  double delta_p = 0.1;
  double delta_f = 0.5;
  double noise_sd = 1.0;
  std::uint64_t seed = 1;
  std::size_t replications = 1;

  void validate() const;
  //! Compact identifier, e.g. "n0=100;d=100;t=1;dp=0.1;df=0.5".
  std::string id() const;
};

//! The 32 (d, t, delta_p, delta_f) cells for one target size.
std::vector<ScenarioConfig> full_scenario_grid(std::size_t n0, std::size_t replications, std::uint64_t seed);

//! Density of X = (U + tV)/(1+t) for independent uniforms U, V.
double covariate_density(double x, double t);

//! Component functions of the target and auxiliary populations. Population
//! 0 is the target; 1 and 2 are the modified auxiliary populations.
class TrueModel
{
public:
  static constexpr std::size_t active_components = 12;

  explicit TrueModel(const ScenarioConfig& cfg, std::size_t quadrature_points = 1'000'000);

  //! Uncentred base functions for j in {1, 2, 3, 4}.
  static double base_function(int j, double u);

  //! Centering constant a_j for j in {1, 2, 3, 4}.
  double centering_constant(int j) const { return a_[static_cast<std::size_t>(j - 1)]; }

  //! f_{pop, j}(u) with a 0-based covariate index j.
  double component(int pop, std::size_t j, double u) const;

  //! sum_j f_{pop, j}(x_j).
  double regression(int pop, std::span<const double> x) const;

  double delta_f() const { return delta_f_; }

private:
  double target(std::size_t j, double u) const;

  double a_[4]{};
  double delta_f_;
};

Sample gen_target(const ScenarioConfig& cfg, const TrueModel& model, std::mt19937_64& rng);

//! Auxiliary population pop in {1, 2}: covariates mix fresh target-law draws
//! (one W per row), responses use the modified component functions.
Sample gen_auxiliary(const ScenarioConfig& cfg, const TrueModel& model, int pop, std::mt19937_64& rng);

struct MiseResult
{
  double value = 0.0;
  double std_error = 0.0;
};

//! Monte-Carlo MISE against the target regression under fresh target-law
//! draws. Columns are regenerated from per-column streams, so the same seed
//! gives common random numbers across estimators.
class MiseEvaluator
{
public:
  MiseEvaluator(const TrueModel& model, const ScenarioConfig& cfg, std::size_t mc_size, std::uint64_t seed);

  MiseResult operator()(const AdditiveFit& estimate) const;

  std::size_t size() const { return mc_size_; }

private:
  std::vector<double> column(std::size_t j) const;

  const TrueModel& model_;
  std::size_t d_;
  double t_;
  std::size_t mc_size_;
  std::uint64_t seed_;
  std::vector<double> v_;
};

MiseResult mise(const AdditiveFit& estimate,
                const TrueModel& model,
                const ScenarioConfig& cfg,
                std::uint64_t seed,
                std::size_t mc_size = 100000);

enum class Method
{
  nw,
  ll,
  tl
};

std::string_view method_name(Method m);
Method parse_method(std::string_view name);

struct ExperimentOptions
{
  std::vector<Method> methods{ Method::nw, Method::ll, Method::tl };
  FitConfig fit;
  std::size_t lambda_grid_size = 20;
  std::size_t pair_grid_size = 10;
  std::size_t mc_size = 100000;
  std::size_t quadrature_points = 1'000'000;
  std::size_t threads = 1;
  //! Record wall time per row; off keeps the table byte-reproducible.
  bool timing = false;
};

struct ReplicationRow
{
  std::string cell;
  Method method = Method::ll;
  std::size_t rep = 0;
  std::uint64_t seed = 0;
  double mise = 0.0;
  double mc_se = 0.0;
  std::optional<double> runtime_s;
  std::string status = "ok";
  //! Size of the estimated active set (not part of the CSV table).
  std::size_t active = 0;
};

//! Seed of replication `rep` of a cell with base seed `seed`.
std::uint64_t replication_seed(std::uint64_t seed, std::size_t rep);

inline constexpr std::string_view replication_csv_header = "cell,method,rep,seed,mise,mc_se,runtime_s,status";

void write_row_csv(std::ostream& out, const ReplicationRow& row);

//! Runs every (cell, replication, method) and returns the rows in that order;
//! when `out` is given the CSV table (with header) is written to it as well.
std::vector<ReplicationRow> run_experiment(std::span<const ScenarioConfig> cells,
                                           const ExperimentOptions& options,
                                           std::ostream* out = nullptr);

} // namespace tlsbf
