#include "nplm/calibration.hpp"

#include <algorithm>
#include <boost/math/special_functions/digamma.hpp>
#include <boost/math/special_functions/gamma.hpp>
#include <cmath>
#include <iostream>
#include <numeric>
#include <sstream>

#include "nplm/mog.hpp"
#include "nplm/parallel.hpp"
#include "nplm/rng.hpp"

namespace nplm {

std::string_view to_string(ResamplingMode m) {
  return m == ResamplingMode::Partition ? "partition" : "bootstrap";
}

ResamplingMode resampling_mode_from_string(std::string_view s) {
  if (s == "partition") return ResamplingMode::Partition;
  if (s == "bootstrap") return ResamplingMode::Bootstrap;
  throw std::invalid_argument("unknown resampling mode: " + std::string(s));
}

namespace {

struct ToyOutcome {
  double t = 0.0;
  bool ok = false;
};

// Toy datasets are a pure function of (master_seed, toy index): partitioned
// toys slice a master permutation, otherwise each toy resamples with its own
// derived seed.
class ToyDraws {
 public:
  ToyDraws(const Dataset& pool, const ResamplingPolicy& policy, int n_toys,
           std::uint64_t master_seed)
      : pool_(pool), policy_(policy) {
    disjoint_ = policy.mode == ResamplingMode::Partition &&
                pool.n() >= static_cast<std::int64_t>(n_toys) * policy.toy_size;
    if (disjoint_) {
      permutation_.resize(static_cast<std::size_t>(pool.n()));
      std::iota(permutation_.begin(), permutation_.end(), std::int64_t{0});
      Rng rng(derive_seed(master_seed, Stream::Partition));
      for (std::size_t i = permutation_.size() - 1; i > 0; --i) {
        const auto j = static_cast<std::size_t>(rng.below(i + 1));
        std::swap(permutation_[i], permutation_[j]);
      }
    }
  }

  bool disjoint() const { return disjoint_; }

  Dataset toy(int index, std::uint64_t toy_seed) const {
    if (disjoint_) {
      Eigen::MatrixXd rows(policy_.toy_size, pool_.dim());
      const auto offset = static_cast<std::size_t>(index) *
                          static_cast<std::size_t>(policy_.toy_size);
      for (std::int64_t r = 0; r < policy_.toy_size; ++r) {
        rows.row(r) = pool_.points.row(
            permutation_[offset + static_cast<std::size_t>(r)]);
      }
      return Dataset{std::move(rows), pool_.label + "|toy", toy_seed};
    }
    return resample(pool_, policy_.toy_size,
                    policy_.mode == ResamplingMode::Bootstrap,
                    derive_seed(toy_seed, Stream::Resample));
  }

 private:
  const Dataset& pool_;
  ResamplingPolicy policy_;
  bool disjoint_ = false;
  std::vector<std::int64_t> permutation_;
};

}  // namespace

NullModel calibrate_null(const Dataset& reference, const Dataset& toy_pool,
                         const NplmConfig& config,
                         const ResamplingPolicy& policy, int n_toys,
                         int threads, bool standardized_inputs) {
  if (n_toys < 20) {
    throw std::invalid_argument("calibrate_null: need at least 20 toys");
  }
  if (policy.toy_size < 1 || policy.toy_size > toy_pool.n()) {
    throw std::invalid_argument(
        "calibrate_null: toy_size must be in [1, pool size]");
  }
  if (reference.n() < 5 * policy.toy_size) {
    std::cerr << "[nplm] warning: reference sample is less than 5x the toy "
                 "size; reference fluctuations may not be subdominant\n";
  }

  const ToyDraws draws(toy_pool, policy, n_toys, config.master_seed);
  std::vector<ToyOutcome> outcomes(static_cast<std::size_t>(n_toys));
  parallel_for(n_toys, threads, [&](std::int64_t i) {
    const std::uint64_t toy_seed =
        derive_seed(config.master_seed, Stream::Toy,
                    static_cast<std::uint64_t>(i));
    NplmConfig toy_config = config;
    toy_config.master_seed = toy_seed;
    auto& slot = outcomes[static_cast<std::size_t>(i)];
    try {
      const SingleTest result = run_single_test(
          reference, draws.toy(static_cast<int>(i), toy_seed), toy_config);
      slot.t = result.t;
      slot.ok = result.model.converged && std::isfinite(result.t);
    } catch (const numeric_error&) {
      slot.ok = false;
    }
  });

  NullModel null;
  for (const auto& o : outcomes) {
    if (o.ok) {
      null.toy_values.push_back(o.t);
    } else {
      ++null.n_failed;
    }
  }
  if (null.n_failed * 10 > n_toys) {
    std::ostringstream msg;
    msg << "calibrate_null: " << null.n_failed << " of " << n_toys
        << " toys failed; regularization appears unstable";
    throw numeric_error(msg.str());
  }
  std::sort(null.toy_values.begin(), null.toy_values.end());
  null.n_toys = static_cast<int>(null.toy_values.size());
  null.chi2_dof = fit_chi2_dof(null.toy_values);
  null.ks_pvalue = ks_compatibility(null.toy_values, null.chi2_dof);
  null.config_fingerprint = config_fingerprint(
      config, reference.n(), policy.toy_size, standardized_inputs);
  null.reference_fingerprint = dataset_fingerprint(reference);
  null.overlap_warning =
      policy.mode == ResamplingMode::Partition &&
      (!draws.disjoint() ||
       dataset_fingerprint(toy_pool) == null.reference_fingerprint);
  return null;
}

double fit_chi2_dof(const std::vector<double>& t_values) {
  if (t_values.size() < 20) {
    throw std::invalid_argument("fit_chi2_dof: need at least 20 values");
  }
  std::vector<double> positive;
  positive.reserve(t_values.size());
  for (double t : t_values) {
    if (!std::isfinite(t)) {
      throw std::invalid_argument("fit_chi2_dof: non-finite value");
    }
    if (t > 0.0) positive.push_back(t);
  }
  if (positive.empty()) {
    throw std::invalid_argument("fit_chi2_dof: all values are <= 0");
  }

  const double mean_all =
      std::accumulate(t_values.begin(), t_values.end(), 0.0) /
      static_cast<double>(t_values.size());
  const auto [lo_it, hi_it] =
      std::minmax_element(positive.begin(), positive.end());
  const bool degenerate =
      (*hi_it - *lo_it) <= 1e-12 * std::max(1.0, std::abs(*hi_it));

  // MLE: digamma(k/2) = mean(log t) - log 2, solved by bisection. A point
  // mass has no interior optimum to bracket, so fall back to moment matching
  // (E[chi2_k] = k) on the full sample.
  if (!degenerate) {
    double target = 0.0;
    for (double t : positive) target += std::log(t);
    target = target / static_cast<double>(positive.size()) - std::log(2.0);
    double lo = 1e-6, hi = 1e8;
    auto g = [&](double k) { return boost::math::digamma(k / 2.0) - target; };
    if (g(lo) < 0.0 && g(hi) > 0.0) {
      for (int it = 0; it < 200 && (hi - lo) > 1e-12 * hi; ++it) {
        const double mid = 0.5 * (lo + hi);
        (g(mid) < 0.0 ? lo : hi) = mid;
      }
      return 0.5 * (lo + hi);
    }
  }
  if (!(mean_all > 0.0)) {
    throw numeric_error(
        "fit_chi2_dof: fallback moment match produced a non-positive dof");
  }
  return mean_all;
}

double ks_compatibility(const std::vector<double>& t_values, double dof) {
  if (t_values.size() < 20) {
    throw std::invalid_argument("ks_compatibility: need at least 20 values");
  }
  if (!(dof > 0.0)) {
    throw std::invalid_argument("ks_compatibility: dof must be > 0");
  }
  std::vector<double> sorted(t_values);
  std::sort(sorted.begin(), sorted.end());
  const auto n = static_cast<double>(sorted.size());
  double d = 0.0;
  for (std::size_t i = 0; i < sorted.size(); ++i) {
    const double cdf =
        sorted[i] <= 0.0
            ? 0.0
            : boost::math::gamma_p(dof / 2.0, sorted[i] / 2.0);
    const double below = static_cast<double>(i) / n;
    const double above = static_cast<double>(i + 1) / n;
    d = std::max(d, std::max(above - cdf, cdf - below));
  }
  return kolmogorov_tail(std::sqrt(n) * d);
}

TestReport make_report(double t_obs, const NullModel& null,
                       std::optional<double> alpha, Direction direction,
                       std::vector<std::uint64_t> seeds) {
  TestReport r;
  r.t_obs = t_obs;
  r.p_empirical = empirical_p_value(t_obs, null.toy_values);
  r.p_chi2 = chi2_p_value(t_obs, null.chi2_dof);
  // the chi2 tail can underflow to zero; the Z-score then sits at its clamp
  r.z_score =
      z_score(std::max(r.p_chi2, std::numeric_limits<double>::denorm_min()));
  r.z_empirical = z_score(r.p_empirical);
  // p at the grid floor means no toy reached t_obs: Z is only a lower bound
  r.z_empirical_saturated =
      r.p_empirical <= 1.0 / (static_cast<double>(null.n_toys) + 1.0);
  if (alpha) {
    if (!(*alpha > 0.0 && *alpha < 1.0)) {
      throw std::invalid_argument("alpha must be in (0, 1)");
    }
    const double t_alpha =
        percentile_linear(null.toy_values, 100.0 * (1.0 - *alpha));
    r.alpha = alpha;
    r.decision = t_obs >= t_alpha;
  }
  r.seeds = std::move(seeds);
  r.direction = direction;
  return r;
}

ValidationSummary run_validation(const Dataset& reference,
                                 const Dataset& data_pool,
                                 const NplmConfig& config,
                                 const NullModel& null, int n_repeats,
                                 const ResamplingPolicy& policy,
                                 Direction direction, int threads,
                                 bool standardized_inputs) {
  if (n_repeats < 1) {
    throw std::invalid_argument("run_validation: n_repeats must be >= 1");
  }
  const std::uint64_t expected = config_fingerprint(
      config, reference.n(), policy.toy_size, standardized_inputs);
  if (expected != null.config_fingerprint) {
    throw std::invalid_argument(
        "run_validation: config fingerprint mismatch (null was built with " +
        fingerprint_hex(null.config_fingerprint) + ", current is " +
        fingerprint_hex(expected) + ")");
  }
  if (null.reference_fingerprint != 0 &&
      null.reference_fingerprint != dataset_fingerprint(reference)) {
    std::cerr << "[nplm] warning: the null model was calibrated on a "
                 "different reference sample\n";
  }

  struct RepeatOutcome {
    TestReport report;
    bool ok = false;
  };
  std::vector<RepeatOutcome> outcomes(static_cast<std::size_t>(n_repeats));
  parallel_for(n_repeats, threads, [&](std::int64_t i) {
    const std::uint64_t repeat_seed =
        derive_seed(config.master_seed, Stream::Repeat,
                    static_cast<std::uint64_t>(i));
    NplmConfig repeat_config = config;
    repeat_config.master_seed = repeat_seed;
    auto& slot = outcomes[static_cast<std::size_t>(i)];
    try {
      const Dataset draw =
          resample(data_pool, policy.toy_size,
                   policy.mode == ResamplingMode::Bootstrap,
                   derive_seed(repeat_seed, Stream::Resample));
      const SingleTest result = run_single_test(reference, draw, repeat_config);
      if (!result.model.converged || !std::isfinite(result.t)) return;
      slot.report = make_report(result.t, null, std::nullopt, direction,
                                {config.master_seed, repeat_seed});
      slot.ok = true;
    } catch (const numeric_error&) {
      slot.ok = false;
    }
  });

  ValidationSummary summary;
  std::vector<double> z_values;
  for (auto& o : outcomes) {
    if (!o.ok) continue;
    z_values.push_back(o.report.z_score);
    summary.per_repeat_reports.push_back(std::move(o.report));
  }
  const auto n_failed =
      n_repeats - static_cast<int>(summary.per_repeat_reports.size());
  if (n_failed * 10 > n_repeats) {
    std::ostringstream msg;
    msg << "run_validation: " << n_failed << " of " << n_repeats
        << " repeats failed";
    throw numeric_error(msg.str());
  }
  summary.n_repeats = static_cast<int>(summary.per_repeat_reports.size());
  summary.z_median = percentile_linear(z_values, 50.0);
  summary.ci68_low = percentile_linear(z_values, 16.0);
  summary.ci68_high = percentile_linear(z_values, 84.0);
  return summary;
}

}  // namespace nplm
