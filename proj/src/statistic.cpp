#include "nplm/statistic.hpp"

#include <algorithm>
#include <boost/math/distributions/normal.hpp>
#include <boost/math/special_functions/gamma.hpp>
#include <cmath>

namespace nplm {

namespace {

double statistic_from_margins(const Eigen::VectorXd& ref_margins,
                              const Eigen::VectorXd& data_margins,
                              double expected_over_ref,
                              ClampCounter* counter) {
  double ref_sum = 0.0;
  for (Eigen::Index i = 0; i < ref_margins.size(); ++i) {
    ref_sum += clamped_exp(ref_margins[i], counter) - 1.0;
  }
  const double data_sum = data_margins.sum();
  return -2.0 * (expected_over_ref * ref_sum - data_sum);
}

}  // namespace

double test_statistic(const TrainedModel& model, const Dataset& reference,
                      const Dataset& data, ClampCounter* counter) {
  const Eigen::VectorXd f_ref = evaluate_f(model, reference);
  const Eigen::VectorXd f_data = evaluate_f(model, data);
  const double ratio =
      model.expected_count / static_cast<double>(model.ref_count);
  const double t = statistic_from_margins(f_ref, f_data, ratio, counter);
  if (!std::isfinite(t)) {
    throw numeric_error("test_statistic: non-finite value");
  }
  return t;
}

SingleTest run_single_test(const Dataset& reference, const Dataset& data,
                           const NplmConfig& config) {
  const detail::FitOutput out =
      detail::fit_with_margins(reference, data, config);
  ClampCounter counter;
  const double ratio = out.model.expected_count /
                       static_cast<double>(out.model.ref_count);
  const double t = statistic_from_margins(
      out.train_margins.head(out.model.ref_count),
      out.train_margins.tail(out.model.data_count), ratio, &counter);
  if (!std::isfinite(t)) {
    throw numeric_error("run_single_test: non-finite statistic");
  }
  return SingleTest{out.model, t, counter.clamped};
}

double empirical_p_value(double t_obs, const std::vector<double>& sorted_toys) {
  if (sorted_toys.empty()) {
    throw std::invalid_argument("empirical_p_value: no toy values");
  }
  // ties count in favour of the null: 1(0) = 1
  const auto first_ge =
      std::lower_bound(sorted_toys.begin(), sorted_toys.end(), t_obs);
  const auto count = static_cast<double>(sorted_toys.end() - first_ge);
  return (count + 1.0) / (static_cast<double>(sorted_toys.size()) + 1.0);
}

double chi2_p_value(double t_obs, double dof) {
  if (!(dof > 0.0)) throw std::invalid_argument("chi2_p_value: dof must be > 0");
  if (t_obs <= 0.0) return 1.0;
  return boost::math::gamma_q(dof / 2.0, t_obs / 2.0);
}

double z_score(double p) {
  if (!(p > 0.0) || p > 1.0) {
    throw std::invalid_argument("z_score: p must be in (0, 1]");
  }
  if (p == 1.0) return -kMaxZScore;
  static const boost::math::normal_distribution<double> unit_normal;
  const double z = boost::math::quantile(boost::math::complement(unit_normal, p));
  return std::clamp(z, -kMaxZScore, kMaxZScore);
}

double kolmogorov_tail(double x) {
  if (x <= 0.0) return 1.0;
  if (x < 1.18) {
    // complement of the theta-series CDF, accurate for small x
    const double u = std::exp(-M_PI * M_PI / (8.0 * x * x));
    const double cdf = std::sqrt(2.0 * M_PI) / x *
                       (u + std::pow(u, 9.0) + std::pow(u, 25.0) +
                        std::pow(u, 49.0));
    return std::clamp(1.0 - cdf, 0.0, 1.0);
  }
  const double v = std::exp(-2.0 * x * x);
  double sum = 0.0;
  double term;
  int j = 1;
  do {
    term = 2.0 * (j % 2 == 1 ? 1.0 : -1.0) * std::pow(v, j * j);
    sum += term;
    ++j;
  } while (std::abs(term) > 1e-16 && j < 100);
  return std::clamp(sum, 0.0, 1.0);
}

double percentile_linear(std::vector<double> values, double percentile) {
  if (values.empty()) {
    throw std::invalid_argument("percentile_linear: empty input");
  }
  if (percentile < 0.0 || percentile > 100.0) {
    throw std::invalid_argument("percentile_linear: percentile out of range");
  }
  std::sort(values.begin(), values.end());
  const double rank =
      percentile / 100.0 * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(rank);
  if (lo + 1 >= values.size()) return values.back();
  const double frac = rank - static_cast<double>(lo);
  return values[lo] + frac * (values[lo + 1] - values[lo]);
}

}  // namespace nplm
