#pragma once

#include <cstdint>

#include "nplm/types.hpp"

namespace nplm {

// Dense Gaussian-kernel matrix between two samples.
struct KernelMatrix {
  RowMatrixXd values;  // n x m, entries in (0, 1]
  std::uint64_t row_source = 0;
  std::uint64_t col_source = 0;
  double kernel_width = 0.0;
};

// Entry (i, j) = ||a_i - b_j||^2, computed via the expansion
// ||a||^2 + ||b||^2 - 2 a.b and clamped at zero.
Eigen::MatrixXd pairwise_sq_distances(const Dataset& a, const Dataset& b);

// Entry (i, j) = exp(-||a_i - b_j||^2 / (2 sigma^2)). When a and b are the
// same sample the result is exactly symmetric with unit diagonal.
KernelMatrix gaussian_kernel(const Dataset& a, const Dataset& b, double sigma);

// m distinct rows of pool, uniform without replacement, deterministic in seed.
Dataset sample_centers(const Dataset& pool, int m, std::uint64_t seed);

namespace detail {

// Matrix-level building blocks used by the solver; same math as the public
// operations, without dataset metadata.
Eigen::MatrixXd sq_distance_block(const Eigen::MatrixXd& a,
                                  const Eigen::MatrixXd& b);
RowMatrixXd kernel_block(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b,
                         double sigma, bool same_source = false);

// Distinct indices in [0, n), uniform without replacement (Floyd's algorithm).
std::vector<std::int64_t> sample_indices(std::int64_t n, std::int64_t k,
                                         std::uint64_t seed);

}  // namespace detail

}  // namespace nplm
