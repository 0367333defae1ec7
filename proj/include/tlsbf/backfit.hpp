#pragma once

#include "tlsbf/kernel.hpp"
#include "tlsbf/sample.hpp"
#include "tlsbf/smoother.hpp"

#include <cstddef>
#include <span>
#include <vector>

namespace tlsbf {

//! Pre-ridge eigenvalue floor of the conditioning guard, applied when n >= 50.
inline constexpr double singular_threshold = 1e-8;
inline constexpr std::size_t singular_check_min_n = 50;

struct FitConfig
{
  double lambda = 0.0;
  int max_outer_iters = 200;
  //! Relative sup-norm change of the value components per full cycle.
  double tol = 1e-6;
  std::size_t grid_size = 101;
  double ridge_floor = 1e-10;
  KernelKind kernel = KernelKind::epanechnikov;
  SmootherMode mode = SmootherMode::local_linear;
  //! Components zero for three consecutive cycles are revisited only every
  //! fifth cycle; the cycle that declares convergence always visits all.
  bool active_set_shortcut = true;

  void validate() const;
};

struct FitDiagnostics
{
  int outer_iters = 0;
  //! Penalized objective after each full cycle; entry 0 is the start point.
  std::vector<double> objective_trace;
  bool converged = false;
};

//! Fitted additive model: intercept plus one component curve per covariate.
struct AdditiveFit
{
  double intercept = 0.0;
  EvalGrid grid{ 101 };
  std::vector<ComponentCurve> components;
  std::vector<std::size_t> active_set;
  Bandwidths bandwidths;
  double lambda = 0.0;
  SmootherMode mode = SmootherMode::local_linear;
  FitDiagnostics diagnostics;

  std::size_t d() const { return components.size(); }
  void refresh_active_set();
};

//! One block update of component j: the unpenalized, constraint-centred
//! minimiser followed by group soft-thresholding. `offset` (possibly empty)
//! is a fixed additive term that is not penalised.
ComponentCurve component_update(std::size_t j,
                                const AdditiveFit& current,
                                const DesignField& design,
                                std::span<const ComponentCurve> offset,
                                const FitConfig& cfg);

//! Minimises the penalized smoothed loss by cyclic block updates, starting
//! from zero components.
AdditiveFit fit(const DesignField& design,
                const FitConfig& cfg,
                std::span<const ComponentCurve> offset = {});

AdditiveFit fit(const Sample& sample,
                const Bandwidths& bandwidths,
                const FitConfig& cfg,
                std::span<const ComponentCurve> offset = {});

DesignField make_design(const Sample& sample, const Bandwidths& bandwidths, const FitConfig& cfg);

//! Smoothed squared loss of offset + fit plus lambda times the tuple norms of
//! the fit's components.
double penalized_objective(const DesignField& design,
                           const AdditiveFit& f,
                           const FitConfig& cfg,
                           std::span<const ComponentCurve> offset = {});

double predict(const AdditiveFit& f, std::span<const double> x);
std::vector<double> predict(const AdditiveFit& f, const Matrix& x);

} // namespace tlsbf
