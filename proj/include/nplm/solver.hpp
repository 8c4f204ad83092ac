#pragma once

#include "nplm/types.hpp"

namespace nplm {

// Pooled training sample: reference rows first, then data rows.
// ref_weight carries the class weight N(R)/N_ref applied to reference terms.
struct LabeledTrainingSet {
  Eigen::MatrixXd points;
  Eigen::VectorXd labels;  // 0 = reference, 1 = data
  double ref_weight = 1.0;
  std::int64_t n_ref = 0;
  std::int64_t n_data = 0;

  std::int64_t n() const { return n_ref + n_data; }
};

LabeledTrainingSet make_training_set(const Dataset& reference,
                                     const Dataset& data);

// Kernel blocks shared by the risk, gradient and Newton steps.
struct KernelBlocks {
  RowMatrixXd train_by_centers;  // N x M
  Eigen::MatrixXd center_gram;   // M x M, symmetric, unit diagonal
};

KernelBlocks make_kernel_blocks(const LabeledTrainingSet& train,
                                const Eigen::MatrixXd& centers, double sigma);

// (1/N) sum_i l(y_i, f_w(x_i)) + lambda * w' K_mm w, with the weighted
// logistic loss l(0, f) = ref_weight * log(1 + e^f), l(1, f) = log(1 + e^-f).
double empirical_risk(const TrainedModel& model,
                      const LabeledTrainingSet& train, double lambda);

Eigen::VectorXd risk_gradient(const Eigen::VectorXd& weights,
                              const LabeledTrainingSet& train,
                              const KernelBlocks& blocks, double lambda);

// Minimizes the regularized risk over the center expansion by a Newton
// iteration with preconditioned-CG inner solves and backtracking steps.
// Deterministic given config.master_seed. Throws numeric_error if the risk
// goes non-finite (lambda too small for the data).
TrainedModel fit(const Dataset& reference, const Dataset& data,
                 const NplmConfig& config);

// f(x) = sum_i weights[i] * k_sigma(x, centers[i]) for each row of points.
Eigen::VectorXd evaluate_f(const TrainedModel& model, const Dataset& points);

namespace detail {

struct FitOutput {
  TrainedModel model;
  Eigen::VectorXd train_margins;  // f at the training points, reference first
  double final_risk = 0.0;
  double gradient_norm = 0.0;
  int cg_iterations_total = 0;
};

FitOutput fit_with_margins(const Dataset& reference, const Dataset& data,
                           const NplmConfig& config);

double stable_log1pexp(double x);
double sigmoid(double x);

}  // namespace detail

}  // namespace nplm
