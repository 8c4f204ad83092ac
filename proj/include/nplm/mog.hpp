#pragma once

#include <cstdint>

#include "nplm/types.hpp"

namespace nplm {

// Axis-aligned mixture of Gaussians used as a controllable benchmark family.
struct MoGSpec {
  int dim = 0;
  int n_components = 0;
  Eigen::MatrixXd means;  // n_components x dim
  Eigen::MatrixXd stds;   // n_components x dim, all > 0
  Eigen::VectorXd mixture_probs;
  std::uint64_t seed = 0;
};

void validate(const MoGSpec& spec);

// Means uniform on [0,10], stds uniform on (0,1], probabilities uniform then
// normalized.
MoGSpec random_mog(int dim, int n_components, std::uint64_t seed);

Dataset sample_mog(const MoGSpec& spec, std::int64_t n, std::uint64_t seed);

// log sum_k pi_k prod_j N(x_j; mu_kj, sigma_kj), via log-sum-exp.
double mog_log_density(const MoGSpec& spec, const Eigen::RowVectorXd& x);

// Imperfect-generator surrogate: shifts each component mean by epsilon along
// a random unit direction, scales its stds by (1 + epsilon*u), tilts the
// mixture probabilities, and renormalizes. The random draws depend only on
// spec.seed, so varying epsilon traces a smooth family. epsilon = 0 returns
// the input unchanged.
MoGSpec perturb_mog(const MoGSpec& spec, double epsilon);

// Uniform draw of n rows, with or without replacement.
Dataset resample(const Dataset& pool, std::int64_t n, bool with_replacement,
                 std::uint64_t seed);

}  // namespace nplm
