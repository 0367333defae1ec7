#pragma once

#include "tlsbf/backfit.hpp"
#include "tlsbf/kernel.hpp"
#include "tlsbf/sample.hpp"
#include "tlsbf/smoother.hpp"

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

namespace tlsbf {

struct LabeledSample
{
  std::string label;
  Sample sample;
};

//! A target sample and its auxiliary samples.
class MultiSampleSet
{
public:
  MultiSampleSet(Sample target, std::vector<LabeledSample> auxiliaries);

  const Sample& target() const { return target_; }
  std::span<const LabeledSample> auxiliaries() const { return auxiliaries_; }
  std::size_t d() const { return target_.d(); }

  //! w_a = n_a / n_A over the auxiliaries.
  std::vector<double> weights() const;

  //! Samples entering the pooled first-stage fit, target first when included.
  std::vector<std::reference_wrapper<const Sample>> pool(bool include_target) const;

private:
  Sample target_;
  std::vector<LabeledSample> auxiliaries_;
};

struct TLConfig
{
  double lambda1 = 0.0;
  double lambda2 = 0.0;
  Bandwidths bw_pooled;
  Bandwidths bw_target;
  bool include_target_in_pool = true;
  FitConfig inner;
};

struct TLFit
{
  //! Step 1 aggregated fit.
  AdditiveFit pooled;
  //! Step 3 de-biasing fit.
  AdditiveFit correction;
  //! Centered pooled components plus correction, with the target intercept.
  AdditiveFit final;
};

DesignField make_pooled_design(const MultiSampleSet& data, const TLConfig& cfg);
DesignField make_target_design(const MultiSampleSet& data, const TLConfig& cfg);

//! Step 1: weighted multi-sample fLasso fit with penalty lambda1 and the
//! pooled bandwidths.
AdditiveFit pooled_fit(const MultiSampleSet& data, const TLConfig& cfg);
AdditiveFit pooled_fit(const DesignField& pooled_design, const TLConfig& cfg);

//! Step 2: removes Pi00 under the target design from every component.
//! Derivatives are interpreted with the target bandwidths.
std::vector<ComponentCurve> center_to_target(const AdditiveFit& pooled,
                                             const DesignField& target_design);

//! Step 3: target fit with penalty lambda2 around the fixed offset.
AdditiveFit debias_fit(const MultiSampleSet& data,
                       std::span<const ComponentCurve> centered_offset,
                       const TLConfig& cfg);
AdditiveFit debias_fit(const DesignField& target_design,
                       std::span<const ComponentCurve> centered_offset,
                       const TLConfig& cfg);

//! Step 4 composition.
AdditiveFit combine_fits(std::span<const ComponentCurve> centered_offset,
                         const AdditiveFit& correction,
                         double target_intercept);

TLFit tl_fit(const MultiSampleSet& data, const TLConfig& cfg);

struct SourceScore
{
  std::string label;
  double score = 0.0;
  bool accepted = false;
};

struct DetectionConfig
{
  double c_sd = 1.0;
  int n_splits = 2;
  std::uint64_t seed = 0;
  FitConfig inner;
  //! Size of the BIC lambda grid used for every detection fit.
  std::size_t lambda_grid_size = 20;
  std::size_t threads = 1;
};

//! Split-sample transferable source detection. Each candidate's score is the
//! mean absolute difference, at target covariates, between the first-stage
//! pooled fit (target half + candidate) and the target-only fit; a candidate
//! is accepted when the score is below c_sd / 4.
std::vector<SourceScore> detect_sources(const Sample& target,
                                        std::span<const LabeledSample> candidates,
                                        const DetectionConfig& cfg);

} // namespace tlsbf
