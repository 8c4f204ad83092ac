#pragma once

#include <vector>

#include "nplm/statistic.hpp"
#include "nplm/types.hpp"

namespace nplm {

enum class ResamplingMode {
  Partition,  // disjoint draws without replacement when the pool allows it
  Bootstrap,  // with replacement
};

struct ResamplingPolicy {
  ResamplingMode mode = ResamplingMode::Bootstrap;
  std::int64_t toy_size = 0;
};

std::string_view to_string(ResamplingMode m);
ResamplingMode resampling_mode_from_string(std::string_view s);

// Estimates the null distribution of the statistic by running n_toys
// independent tests of reference vs. a toy drawn from toy_pool. Per-toy seeds
// derive from (config.master_seed, toy index). Failed toys (non-convergence
// or non-finite output) are excluded and counted; more than 10% failures
// rejects the calibration.
NullModel calibrate_null(const Dataset& reference, const Dataset& toy_pool,
                         const NplmConfig& config,
                         const ResamplingPolicy& policy, int n_toys,
                         int threads = 1, bool standardized_inputs = false);

// Maximum-likelihood chi2 degrees of freedom for the positive part of
// t_values; falls back to the sample mean (moment matching) if the
// likelihood search cannot bracket.
double fit_chi2_dof(const std::vector<double>& t_values);

// Asymptotic one-sample KS p-value of t_values against chi2(dof).
double ks_compatibility(const std::vector<double>& t_values, double dof);

// Repeats the test n_repeats times on draws from data_pool, converting each
// statistic to a Z-score through the fitted chi2 null. The null must carry
// the same config fingerprint.
ValidationSummary run_validation(const Dataset& reference,
                                 const Dataset& data_pool,
                                 const NplmConfig& config,
                                 const NullModel& null, int n_repeats,
                                 const ResamplingPolicy& policy,
                                 Direction direction = Direction::TrueAsReference,
                                 int threads = 1,
                                 bool standardized_inputs = false);

// Builds a TestReport for an observed statistic against a calibrated null.
TestReport make_report(double t_obs, const NullModel& null,
                       std::optional<double> alpha, Direction direction,
                       std::vector<std::uint64_t> seeds);

}  // namespace nplm
