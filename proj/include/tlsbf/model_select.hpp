#pragma once

#include "tlsbf/backfit.hpp"
#include "tlsbf/kernel.hpp"
#include "tlsbf/sample.hpp"
#include "tlsbf/smoother.hpp"
#include "tlsbf/transfer.hpp"

#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <vector>

namespace tlsbf {

//! Normal-reference rule-of-thumb constant for the Epanechnikov kernel.
inline constexpr double rot_constant = 2.34;
inline constexpr double rot_min_bandwidth = 0.01;
inline constexpr double rot_max_bandwidth = 0.5;

struct RuleOfThumb
{
  Bandwidths bandwidths;
  //! Covariates with zero sample spread; their bandwidth is the floor.
  std::vector<std::size_t> constant_columns;
};

//! h_j = c_rot * sd(X_j) * n^{-1/5}, clipped to [0.01, 0.5]. `n_effective`
//! replaces n in the rate when nonzero.
RuleOfThumb rot_bandwidth(const Sample& sample, double n_effective = 0.0);

//! Same rule with the spread taken over the pooled rows of several samples.
RuleOfThumb rot_bandwidth(std::span<const std::reference_wrapper<const Sample>> samples,
                          double n_effective = 0.0);

//! Smallest eigenvalue of the marginal local-linear design of one covariate
//! over the grid (pooled rows), before any ridge term.
double min_design_eigenvalue(std::span<const double> column, double h, const FitConfig& cfg);

//! Widens each h_j by factors of 1.25 (capped at 0.5) until the conditioning
//! guard of `fit` passes for the pooled rows. Each change adds a warning.
Bandwidths widen_until_conditioned(std::span<const std::reference_wrapper<const Sample>> samples,
                                   const Bandwidths& bandwidths,
                                   const FitConfig& cfg,
                                   std::vector<std::string>* warnings = nullptr);
Bandwidths widen_until_conditioned(const Sample& sample,
                                   const Bandwidths& bandwidths,
                                   const FitConfig& cfg,
                                   std::vector<std::string>* warnings = nullptr);

class LambdaGrid
{
public:
  explicit LambdaGrid(std::vector<double> values);

  //! `count` log-spaced values spanning [lo, hi] * scale.
  static LambdaGrid log_spaced(double scale, std::size_t count = 20, double lo = 1e-3, double hi = 1.0);

  std::size_t size() const { return values_.size(); }
  double operator[](std::size_t k) const { return values_[k]; }
  std::span<const double> values() const { return values_; }

private:
  std::vector<double> values_;
};

struct BicScore
{
  double value = 0.0;
  //! Zero residual sum of squares; value is -infinity.
  bool degenerate = false;
};

//! log((1/2n) sum (Y_i - fhat(X_i))^2) + sum_{j active} log(n h_j) / (n h_j).
BicScore bic_score(const Sample& sample, const AdditiveFit& f);

//! BIC over the rows of a (possibly pooled) design, each row's response taken
//! relative to its own population mean.
BicScore bic_score(const DesignField& design, const AdditiveFit& f);

struct LambdaSelection
{
  double lambda = 0.0;
  AdditiveFit fit;
  //! Score per grid value; NaN where the fit failed.
  std::vector<double> scores;
  std::vector<std::string> warnings;
};

//! Fits every grid value and keeps the BIC minimiser; ties go to the larger
//! lambda.
LambdaSelection select_lambda(const DesignField& design,
                              const LambdaGrid& grid,
                              const FitConfig& cfg,
                              std::size_t threads = 1);

LambdaSelection select_lambda(const Sample& sample,
                              const Bandwidths& bandwidths,
                              const LambdaGrid& grid,
                              const FitConfig& cfg,
                              std::size_t threads = 1);

struct PairSelection
{
  double lambda1 = 0.0;
  double lambda2 = 0.0;
  TLFit fit;
  //! Row-major |grid1| x |grid2| TL-BIC scores; NaN where a fit failed.
  std::vector<double> scores;
  std::vector<std::string> warnings;
};

//! Two-dimensional BIC search over (lambda1, lambda2). With `cache_step1`
//! the pooled fit is computed once per lambda1.
PairSelection select_lambda_pair(const MultiSampleSet& data,
                                 const TLConfig& base,
                                 const LambdaGrid& grid1,
                                 const LambdaGrid& grid2,
                                 bool cache_step1 = true,
                                 std::size_t threads = 1);

} // namespace tlsbf
