#include "nplm/solver.hpp"

#include <Eigen/Cholesky>
#include <algorithm>
#include <cmath>
#include <sstream>

#include "nplm/kernel.hpp"
#include "nplm/rng.hpp"

namespace nplm {

namespace detail {

double stable_log1pexp(double x) {
  return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

}  // namespace detail

namespace {

using detail::sigmoid;
using detail::stable_log1pexp;

constexpr Eigen::Index kRowBlock = 256;

// Sum of per-row losses and, optionally, d(loss)/df per row.
// y=0 rows carry the class weight ref_weight, y=1 rows weight 1.
double loss_and_derivative(const Eigen::VectorXd& margins,
                           const LabeledTrainingSet& train,
                           Eigen::VectorXd* deriv) {
  const Eigen::Index n = margins.size();
  if (deriv) deriv->resize(n);
  double sum = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double f = margins[i];
    if (train.labels[i] == 0.0) {
      sum += train.ref_weight * stable_log1pexp(f);
      if (deriv) (*deriv)[i] = train.ref_weight * sigmoid(f);
    } else {
      sum += stable_log1pexp(-f);
      if (deriv) (*deriv)[i] = -sigmoid(-f);
    }
  }
  return sum;
}

Eigen::VectorXd loss_curvature(const Eigen::VectorXd& margins,
                               const LabeledTrainingSet& train) {
  Eigen::VectorXd curv(margins.size());
  for (Eigen::Index i = 0; i < margins.size(); ++i) {
    const double s = sigmoid(margins[i]);
    const double c = train.labels[i] == 0.0 ? train.ref_weight : 1.0;
    curv[i] = c * s * (1.0 - s);
  }
  return curv;
}

// H v = (1/N) Z' diag(curv) Z v + 2 lambda K v, computed in one streaming
// pass over Z with a fixed block size so results are independent of the
// caller's threading.
Eigen::VectorXd apply_hessian(const RowMatrixXd& z,
                              const Eigen::VectorXd& curv,
                              const Eigen::MatrixXd& center_gram,
                              double inv_n, double lambda,
                              const Eigen::VectorXd& v) {
  const Eigen::Index n = z.rows();
  Eigen::VectorXd acc = Eigen::VectorXd::Zero(z.cols());
  Eigen::VectorXd buf(std::min(kRowBlock, n));
  for (Eigen::Index start = 0; start < n; start += kRowBlock) {
    const Eigen::Index b = std::min(kRowBlock, n - start);
    const auto zb = z.middleRows(start, b);
    buf.head(b).noalias() = zb * v;
    buf.head(b).array() *= curv.segment(start, b).array();
    acc.noalias() += zb.transpose() * buf.head(b);
  }
  Eigen::VectorXd out = (2.0 * lambda) * (center_gram * v);
  out.noalias() += inv_n * acc;
  return out;
}

// Preconditioned CG on the Newton system; returns iterations used.
int pcg_solve(const RowMatrixXd& z, const Eigen::VectorXd& curv,
              const Eigen::MatrixXd& center_gram, double inv_n, double lambda,
              const Eigen::LLT<Eigen::MatrixXd>& prec,
              const Eigen::VectorXd& rhs, double rel_tol, int max_iter,
              Eigen::VectorXd& x) {
  x.setZero(rhs.size());
  Eigen::VectorXd r = rhs;
  const double target = rel_tol * rhs.norm();
  if (rhs.norm() == 0.0) return 0;
  Eigen::VectorXd zv = prec.solve(r);
  Eigen::VectorXd p = zv;
  double rz = r.dot(zv);
  int it = 0;
  for (; it < max_iter; ++it) {
    const Eigen::VectorXd hp =
        apply_hessian(z, curv, center_gram, inv_n, lambda, p);
    const double php = p.dot(hp);
    if (!(php > 0.0) || !std::isfinite(php)) break;  // curvature lost
    const double alpha = rz / php;
    x += alpha * p;
    r -= alpha * hp;
    if (r.norm() <= target) {
      ++it;
      break;
    }
    zv = prec.solve(r);
    const double rz_next = r.dot(zv);
    p = zv + (rz_next / rz) * p;
    rz = rz_next;
  }
  return it;
}

}  // namespace

LabeledTrainingSet make_training_set(const Dataset& reference,
                                     const Dataset& data) {
  if (reference.dim() != data.dim()) {
    throw std::invalid_argument("training set: dimension mismatch");
  }
  LabeledTrainingSet train;
  train.n_ref = reference.n();
  train.n_data = data.n();
  train.points.resize(train.n(), reference.dim());
  train.points.topRows(train.n_ref) = reference.points;
  train.points.bottomRows(train.n_data) = data.points;
  train.labels.setZero(train.n());
  train.labels.tail(train.n_data).setOnes();
  // the expected count N(R) is identified with the data sample size
  train.ref_weight =
      static_cast<double>(train.n_data) / static_cast<double>(train.n_ref);
  return train;
}

KernelBlocks make_kernel_blocks(const LabeledTrainingSet& train,
                                const Eigen::MatrixXd& centers, double sigma) {
  KernelBlocks blocks;
  blocks.train_by_centers = detail::kernel_block(train.points, centers, sigma);
  blocks.center_gram = detail::kernel_block(centers, centers, sigma, true);
  return blocks;
}

double empirical_risk(const TrainedModel& model,
                      const LabeledTrainingSet& train, double lambda) {
  if (model.weights.size() != model.centers.rows() ||
      train.points.cols() != model.centers.cols()) {
    throw std::invalid_argument("empirical_risk: inconsistent shapes");
  }
  const RowMatrixXd z = detail::kernel_block(train.points, model.centers,
                                             model.kernel_width);
  const Eigen::MatrixXd gram =
      detail::kernel_block(model.centers, model.centers, model.kernel_width,
                           true);
  const Eigen::VectorXd margins = z * model.weights;
  const double loss = loss_and_derivative(margins, train, nullptr);
  const double reg = model.weights.dot(gram * model.weights);
  return loss / static_cast<double>(train.n()) + lambda * reg;
}

Eigen::VectorXd risk_gradient(const Eigen::VectorXd& weights,
                              const LabeledTrainingSet& train,
                              const KernelBlocks& blocks, double lambda) {
  if (blocks.train_by_centers.rows() != train.n() ||
      blocks.train_by_centers.cols() != weights.size()) {
    throw std::invalid_argument("risk_gradient: inconsistent shapes");
  }
  const Eigen::VectorXd margins = blocks.train_by_centers * weights;
  Eigen::VectorXd deriv;
  loss_and_derivative(margins, train, &deriv);
  Eigen::VectorXd grad =
      (blocks.train_by_centers.transpose() * deriv) /
      static_cast<double>(train.n());
  grad.noalias() += (2.0 * lambda) * (blocks.center_gram * weights);
  return grad;
}

namespace detail {

FitOutput fit_with_margins(const Dataset& reference, const Dataset& data,
                           const NplmConfig& config) {
  validate(config);
  LabeledTrainingSet train = make_training_set(reference, data);
  const auto n = train.n();
  if (config.n_centers > n) {
    throw std::invalid_argument(
        "fit: n_centers exceeds the pooled sample size");
  }

  Dataset pooled{train.points, "pooled", std::nullopt};
  const Dataset centers =
      sample_centers(pooled, config.n_centers,
                     derive_seed(config.master_seed, Stream::Centers));
  const double lambda = config.regularization;
  const KernelBlocks blocks =
      make_kernel_blocks(train, centers.points, config.kernel_width);
  const RowMatrixXd& z = blocks.train_by_centers;
  const Eigen::MatrixXd& gram = blocks.center_gram;
  const auto m = static_cast<Eigen::Index>(config.n_centers);
  const double inv_n = 1.0 / static_cast<double>(n);

  // Preconditioner: center gram plus a lambda*N ridge, with escalating
  // jitter if the factorization fails.
  Eigen::MatrixXd prec_matrix = gram;
  prec_matrix.diagonal().array() += lambda * static_cast<double>(n);
  Eigen::LLT<Eigen::MatrixXd> prec(prec_matrix);
  double jitter = 1e-12 * prec_matrix.trace() / static_cast<double>(m);
  for (int attempt = 0; prec.info() != Eigen::Success && attempt < 8;
       ++attempt) {
    prec_matrix.diagonal().array() += jitter;
    jitter *= 10.0;
    prec.compute(prec_matrix);
  }
  if (prec.info() != Eigen::Success) {
    throw numeric_error("fit: preconditioner factorization failed");
  }

  Eigen::VectorXd w = Eigen::VectorXd::Zero(m);
  Eigen::VectorXd margins = Eigen::VectorXd::Zero(n);
  Eigen::VectorXd deriv;
  double loss = loss_and_derivative(margins, train, &deriv);
  Eigen::VectorXd grad = (z.transpose() * deriv) * inv_n;
  double reg = 0.0;
  double risk = loss * inv_n;
  const double grad0 = grad.norm();
  const double grad_ref = std::max(1.0, grad0);

  int accepted_steps = 0;
  int cg_total = 0;
  Eigen::VectorXd step;
  bool converged = grad.norm() <= config.newton_tol * grad_ref;
  while (!converged && accepted_steps < config.newton_max_iter) {
    const double gnorm = grad.norm();
    const Eigen::VectorXd curv = loss_curvature(margins, train);

    // inexact Newton: solve loosely far from the optimum
    const double forcing =
        std::clamp(std::sqrt(gnorm / grad_ref), 1e-8, 0.25);
    cg_total += pcg_solve(z, curv, gram, inv_n, lambda, prec,
                          Eigen::VectorXd(-grad), forcing,
                          config.cg_max_iter, step);
    if (!step.allFinite() || step.squaredNorm() == 0.0) break;

    const Eigen::VectorXd step_margins = z * step;
    const Eigen::VectorXd gram_step = gram * step;
    const double w_k_step = w.dot(gram_step);
    const double step_k_step = step.dot(gram_step);

    double stride = 1.0;
    bool accepted = false;
    Eigen::VectorXd margins_try;
    double loss_try = 0.0, risk_try = 0.0, reg_try = 0.0;
    for (int halving = 0; halving <= 30; ++halving) {
      margins_try = margins + stride * step_margins;
      loss_try = loss_and_derivative(margins_try, train, nullptr);
      reg_try = reg + 2.0 * stride * w_k_step +
                stride * stride * step_k_step;
      risk_try = loss_try * inv_n + lambda * reg_try;
      if (std::isfinite(risk_try) && risk_try < risk) {
        accepted = true;
        break;
      }
      stride *= 0.5;
    }
    if (!accepted) break;  // no descent available; report via converged flag

    w += stride * step;
    margins.swap(margins_try);
    ++accepted_steps;

    loss = loss_and_derivative(margins, train, &deriv);
    const Eigen::VectorXd gram_w = gram * w;  // fresh, avoids drift
    reg = w.dot(gram_w);
    risk = loss * inv_n + lambda * reg;
    if (!std::isfinite(risk)) {
      std::ostringstream msg;
      msg << "fit: non-finite risk at iteration " << accepted_steps
          << " (gradient norm " << gnorm
          << "); regularization may be too small";
      throw numeric_error(msg.str());
    }
    grad = (z.transpose() * deriv) * inv_n;
    grad.noalias() += 2.0 * lambda * gram_w;
    converged = grad.norm() <= config.newton_tol * grad_ref;
  }

  FitOutput out;
  out.model.centers = centers.points;
  out.model.weights = w;
  out.model.kernel_width = config.kernel_width;
  out.model.ref_count = train.n_ref;
  out.model.data_count = train.n_data;
  out.model.expected_count = static_cast<double>(train.n_data);
  out.model.converged = converged;
  out.model.iterations_used = accepted_steps;
  out.train_margins = z * w;  // exact margins for the in-sample statistic
  out.final_risk = risk;
  out.gradient_norm = grad.norm();
  out.cg_iterations_total = cg_total;
  if (!w.allFinite()) {
    throw numeric_error("fit: non-finite weights after Newton loop");
  }
  return out;
}

}  // namespace detail

TrainedModel fit(const Dataset& reference, const Dataset& data,
                 const NplmConfig& config) {
  return detail::fit_with_margins(reference, data, config).model;
}

Eigen::VectorXd evaluate_f(const TrainedModel& model, const Dataset& points) {
  if (points.dim() != model.centers.cols()) {
    throw std::invalid_argument("evaluate_f: dimension mismatch");
  }
  if (model.weights.size() != model.centers.rows()) {
    throw std::invalid_argument("evaluate_f: model weights/centers mismatch");
  }
  constexpr Eigen::Index kChunk = 8192;
  const Eigen::Index n = points.n();
  Eigen::VectorXd f(n);
  for (Eigen::Index start = 0; start < n; start += kChunk) {
    const Eigen::Index b = std::min(kChunk, n - start);
    const RowMatrixXd k = detail::kernel_block(
        points.points.middleRows(start, b), model.centers,
        model.kernel_width);
    f.segment(start, b).noalias() = k * model.weights;
  }
  return f;
}

}  // namespace nplm
