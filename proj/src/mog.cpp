#include "nplm/mog.hpp"

#include <bit>
#include <cmath>

#include "nplm/kernel.hpp"
#include "nplm/rng.hpp"

namespace nplm {

void validate(const MoGSpec& spec) {
  if (spec.dim < 1 || spec.n_components < 1) {
    throw std::invalid_argument("mog spec: dim and n_components must be >= 1");
  }
  if (spec.means.rows() != spec.n_components || spec.means.cols() != spec.dim ||
      spec.stds.rows() != spec.n_components || spec.stds.cols() != spec.dim ||
      spec.mixture_probs.size() != spec.n_components) {
    throw std::invalid_argument("mog spec: inconsistent shapes");
  }
  if ((spec.stds.array() <= 0.0).any()) {
    throw std::invalid_argument("mog spec: stds must be > 0");
  }
  if ((spec.mixture_probs.array() < 0.0).any() ||
      std::abs(spec.mixture_probs.sum() - 1.0) > 1e-12) {
    throw std::invalid_argument("mog spec: probabilities must form a simplex");
  }
}

MoGSpec random_mog(int dim, int n_components, std::uint64_t seed) {
  if (dim < 1 || n_components < 1) {
    throw std::invalid_argument("random_mog: dim and n_components must be >= 1");
  }
  Rng rng(derive_seed(seed, Stream::Sample));
  MoGSpec spec;
  spec.dim = dim;
  spec.n_components = n_components;
  spec.seed = seed;
  spec.means.resize(n_components, dim);
  spec.stds.resize(n_components, dim);
  spec.mixture_probs.resize(n_components);
  for (int k = 0; k < n_components; ++k) {
    for (int j = 0; j < dim; ++j) spec.means(k, j) = rng.uniform(0.0, 10.0);
    for (int j = 0; j < dim; ++j) spec.stds(k, j) = 1.0 - rng.uniform();  // (0,1]
    spec.mixture_probs[k] = rng.uniform();
  }
  const double total = spec.mixture_probs.sum();
  if (total > 0.0) {
    spec.mixture_probs /= total;
  } else {
    spec.mixture_probs.setConstant(1.0 / n_components);
  }
  return spec;
}

Dataset sample_mog(const MoGSpec& spec, std::int64_t n, std::uint64_t seed) {
  validate(spec);
  if (n < 1) throw std::invalid_argument("sample_mog: n must be >= 1");
  Rng rng(derive_seed(seed, Stream::Sample));
  Eigen::VectorXd cumulative(spec.n_components);
  double acc = 0.0;
  for (int k = 0; k < spec.n_components; ++k) {
    acc += spec.mixture_probs[k];
    cumulative[k] = acc;
  }
  Eigen::MatrixXd points(n, spec.dim);
  for (std::int64_t i = 0; i < n; ++i) {
    const double u = rng.uniform();
    int k = 0;
    while (k + 1 < spec.n_components && u >= cumulative[k]) ++k;
    for (int j = 0; j < spec.dim; ++j) {
      points(i, j) = spec.means(k, j) + spec.stds(k, j) * rng.normal();
    }
  }
  return Dataset{std::move(points), "mog", seed};
}

double mog_log_density(const MoGSpec& spec, const Eigen::RowVectorXd& x) {
  validate(spec);
  if (x.size() != spec.dim) {
    throw std::invalid_argument("mog_log_density: dimension mismatch");
  }
  constexpr double kHalfLog2Pi = 0.918938533204672741780329736406;  // log(2pi)/2
  double best = -std::numeric_limits<double>::infinity();
  Eigen::VectorXd component_logs(spec.n_components);
  for (int k = 0; k < spec.n_components; ++k) {
    double lg = spec.mixture_probs[k] > 0.0
                    ? std::log(spec.mixture_probs[k])
                    : -std::numeric_limits<double>::infinity();
    for (int j = 0; j < spec.dim; ++j) {
      const double zscore = (x[j] - spec.means(k, j)) / spec.stds(k, j);
      lg += -kHalfLog2Pi - std::log(spec.stds(k, j)) - 0.5 * zscore * zscore;
    }
    component_logs[k] = lg;
    best = std::max(best, lg);
  }
  if (!std::isfinite(best)) return best;
  double sum = 0.0;
  for (int k = 0; k < spec.n_components; ++k) {
    sum += std::exp(component_logs[k] - best);
  }
  return best + std::log(sum);
}

MoGSpec perturb_mog(const MoGSpec& spec, double epsilon) {
  validate(spec);
  if (epsilon < 0.0) {
    throw std::invalid_argument("perturb_mog: epsilon must be >= 0");
  }
  if (epsilon == 0.0) return spec;

  Rng rng(derive_seed(spec.seed, Stream::Perturb));
  MoGSpec out = spec;
  for (int k = 0; k < spec.n_components; ++k) {
    // mean shift of length epsilon along a random unit direction
    Eigen::RowVectorXd direction(spec.dim);
    double norm = 0.0;
    do {
      for (int j = 0; j < spec.dim; ++j) direction[j] = rng.normal();
      norm = direction.norm();
    } while (norm < 1e-12);
    out.means.row(k) += (epsilon / norm) * direction;

    // width scale in [1 - eps, 1 + eps], floored to stay positive
    const double scale = std::max(0.05, 1.0 + epsilon * rng.uniform(-1.0, 1.0));
    out.stds.row(k) *= scale;

    const double tilt = std::max(0.0, 1.0 + epsilon * rng.uniform(-1.0, 1.0));
    out.mixture_probs[k] *= tilt;
  }
  const double total = out.mixture_probs.sum();
  if (total > 0.0) {
    out.mixture_probs /= total;
  } else {
    out.mixture_probs = spec.mixture_probs;
  }
  out.seed = derive_seed(spec.seed, Stream::Perturb,
                         std::bit_cast<std::uint64_t>(epsilon));
  return out;
}

Dataset resample(const Dataset& pool, std::int64_t n, bool with_replacement,
                 std::uint64_t seed) {
  if (n < 1) throw std::invalid_argument("resample: n must be >= 1");
  if (!with_replacement && n > pool.n()) {
    throw std::invalid_argument(
        "resample: n exceeds pool size without replacement");
  }
  Eigen::MatrixXd rows(n, pool.dim());
  if (with_replacement) {
    Rng rng(derive_seed(seed, Stream::Resample));
    for (std::int64_t i = 0; i < n; ++i) {
      rows.row(i) = pool.points.row(static_cast<std::int64_t>(
          rng.below(static_cast<std::uint64_t>(pool.n()))));
    }
  } else {
    const auto idx =
        detail::sample_indices(pool.n(), n, derive_seed(seed, Stream::Resample));
    for (std::int64_t i = 0; i < n; ++i) {
      rows.row(i) = pool.points.row(idx[static_cast<std::size_t>(i)]);
    }
  }
  return Dataset{std::move(rows), pool.label + "|resample", seed};
}

}  // namespace nplm
