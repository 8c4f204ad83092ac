#pragma once

#include <vector>

#include "nplm/solver.hpp"
#include "nplm/types.hpp"

namespace nplm {

// exp(f) overflow guard used in the statistic and in reference reweighting.
inline constexpr double kMaxExpArg = 50.0;

struct ClampCounter {
  std::int64_t clamped = 0;
};

inline double clamped_exp(double x, ClampCounter* counter = nullptr) {
  if (x > kMaxExpArg) {
    if (counter) ++counter->clamped;
    x = kMaxExpArg;
  }
  return std::exp(x);
}

// t = -2 [ (N(R)/N_ref) * sum_ref (e^f - 1) - sum_data f ]
double test_statistic(const TrainedModel& model, const Dataset& reference,
                      const Dataset& data, ClampCounter* counter = nullptr);

struct SingleTest {
  TrainedModel model;
  double t = 0.0;
  std::int64_t exp_clamped = 0;
};

// Fit then evaluate the statistic in-sample on the full training data.
SingleTest run_single_test(const Dataset& reference, const Dataset& data,
                           const NplmConfig& config);

// [#(toys >= t_obs) + 1] / (n_toys + 1); ties count against t_obs.
double empirical_p_value(double t_obs, const std::vector<double>& sorted_toys);

// Upper tail of chi2(dof) at t_obs; returns 1 for t_obs <= 0.
double chi2_p_value(double t_obs, double dof);

// Phi^-1(1 - p), clamped to +-kMaxZScore so reports stay finite.
inline constexpr double kMaxZScore = 38.5;
double z_score(double p);

// Upper tail of the Kolmogorov distribution at x (the limiting law of
// sqrt(n) * D_n).
double kolmogorov_tail(double x);

// Percentile with linear interpolation between order statistics (rank
// p/100 * (n-1)). Input need not be sorted.
double percentile_linear(std::vector<double> values, double percentile);

}  // namespace nplm
