#include "nplm/kernel.hpp"

#include <unordered_set>

#include "nplm/rng.hpp"

namespace nplm {

namespace detail {

Eigen::MatrixXd sq_distance_block(const Eigen::MatrixXd& a,
                                  const Eigen::MatrixXd& b) {
  const Eigen::VectorXd a_norms = a.rowwise().squaredNorm();
  const Eigen::VectorXd b_norms = b.rowwise().squaredNorm();
  Eigen::MatrixXd d2 = -2.0 * (a * b.transpose());
  d2.colwise() += a_norms;
  d2.rowwise() += b_norms.transpose();
  return d2.cwiseMax(0.0);  // the expansion can go slightly negative
}

RowMatrixXd kernel_block(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b,
                         double sigma, bool same_source) {
  const double inv = -1.0 / (2.0 * sigma * sigma);
  RowMatrixXd k = (sq_distance_block(a, b) * inv).array().exp();
  if (same_source) {
    // exact symmetry and unit diagonal keep downstream factorizations clean
    for (Eigen::Index i = 0; i < k.rows(); ++i) {
      k(i, i) = 1.0;
      for (Eigen::Index j = i + 1; j < k.cols(); ++j) k(j, i) = k(i, j);
    }
  }
  return k;
}

std::vector<std::int64_t> sample_indices(std::int64_t n, std::int64_t k,
                                         std::uint64_t seed) {
  // Floyd's algorithm: k distinct values, O(k) memory.
  Rng rng(seed);
  std::unordered_set<std::int64_t> seen;
  std::vector<std::int64_t> out;
  seen.reserve(static_cast<std::size_t>(k) * 2);
  out.reserve(static_cast<std::size_t>(k));
  for (std::int64_t j = n - k; j < n; ++j) {
    const auto t =
        static_cast<std::int64_t>(rng.below(static_cast<std::uint64_t>(j) + 1));
    if (seen.insert(t).second) {
      out.push_back(t);
    } else {
      seen.insert(j);
      out.push_back(j);
    }
  }
  return out;
}

}  // namespace detail

Eigen::MatrixXd pairwise_sq_distances(const Dataset& a, const Dataset& b) {
  if (a.dim() != b.dim()) {
    throw std::invalid_argument("pairwise_sq_distances: dimension mismatch");
  }
  Eigen::MatrixXd d2 = detail::sq_distance_block(a.points, b.points);
  if (dataset_fingerprint(a) == dataset_fingerprint(b)) {
    for (Eigen::Index i = 0; i < d2.rows(); ++i) {
      d2(i, i) = 0.0;
      for (Eigen::Index j = i + 1; j < d2.cols(); ++j) d2(j, i) = d2(i, j);
    }
  }
  return d2;
}

KernelMatrix gaussian_kernel(const Dataset& a, const Dataset& b, double sigma) {
  if (!(sigma > 0.0)) {
    throw std::invalid_argument("gaussian_kernel: sigma must be > 0");
  }
  if (a.dim() != b.dim()) {
    throw std::invalid_argument("gaussian_kernel: dimension mismatch");
  }
  KernelMatrix k;
  k.row_source = dataset_fingerprint(a);
  k.col_source = dataset_fingerprint(b);
  k.kernel_width = sigma;
  k.values = detail::kernel_block(a.points, b.points, sigma,
                                  k.row_source == k.col_source);
  return k;
}

Dataset sample_centers(const Dataset& pool, int m, std::uint64_t seed) {
  if (m < 1) throw std::invalid_argument("sample_centers: m must be >= 1");
  if (m > pool.n()) {
    throw std::invalid_argument(
        "sample_centers: m exceeds the number of pooled points");
  }
  const auto idx = detail::sample_indices(pool.n(), m, seed);
  Eigen::MatrixXd centers(m, pool.dim());
  for (int i = 0; i < m; ++i) {
    centers.row(i) = pool.points.row(idx[static_cast<std::size_t>(i)]);
  }
  return Dataset{std::move(centers), pool.label + "|centers", seed};
}

}  // namespace nplm
