#include "nplm/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace nplm {

Eigen::VectorXd classifier_scores(const TrainedModel& model,
                                  const Dataset& points) {
  const Eigen::VectorXd f = evaluate_f(model, points);
  return f.unaryExpr([](double v) { return detail::sigmoid(v); });
}

Dataset select_top_quantile(const Dataset& points,
                            const Eigen::VectorXd& scores, double q,
                            bool bottom) {
  if (scores.size() != points.n()) {
    throw std::invalid_argument(
        "select_top_quantile: scores/points length mismatch");
  }
  if (!(q > 0.0 && q < 1.0)) {
    throw std::invalid_argument("select_top_quantile: q must be in (0, 1)");
  }
  const auto n = points.n();
  const auto k = static_cast<Eigen::Index>(
      std::ceil(q * static_cast<double>(n)));
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  // stable sort keeps original index order on ties
  std::stable_sort(order.begin(), order.end(),
                   [&](Eigen::Index a, Eigen::Index b) {
                     return bottom ? scores[a] < scores[b]
                                   : scores[a] > scores[b];
                   });
  order.resize(static_cast<std::size_t>(k));
  std::sort(order.begin(), order.end());  // emit in original point order
  Eigen::MatrixXd rows(k, points.dim());
  for (Eigen::Index i = 0; i < k; ++i) {
    rows.row(i) = points.points.row(order[static_cast<std::size_t>(i)]);
  }
  return Dataset{std::move(rows),
                 points.label + (bottom ? "|bottom" : "|top"), points.seed};
}

Eigen::VectorXd reweight_reference(const TrainedModel& model,
                                   const Dataset& reference,
                                   ClampCounter* counter) {
  const Eigen::VectorXd f = evaluate_f(model, reference);
  Eigen::VectorXd weights(f.size());
  for (Eigen::Index i = 0; i < f.size(); ++i) {
    weights[i] = clamped_exp(f[i], counter);
  }
  return weights;
}

Eigen::VectorXd histogram_counts(const Eigen::VectorXd& values,
                                 const Eigen::VectorXd& edges,
                                 const Eigen::VectorXd* weights) {
  const auto n_bins = edges.size() - 1;
  if (n_bins < 1) throw std::invalid_argument("histogram: need >= 2 edges");
  if (weights && weights->size() != values.size()) {
    throw std::invalid_argument("histogram: weights length mismatch");
  }
  const double lo = edges[0];
  const double hi = edges[n_bins];
  const double width = (hi - lo) / static_cast<double>(n_bins);
  Eigen::VectorXd counts = Eigen::VectorXd::Zero(n_bins);
  for (Eigen::Index i = 0; i < values.size(); ++i) {
    auto bin = static_cast<Eigen::Index>((values[i] - lo) / width);
    bin = std::clamp<Eigen::Index>(bin, 0, n_bins - 1);
    counts[bin] += weights ? (*weights)[i] : 1.0;
  }
  return counts;
}

BandHistogram score_reference_band(const std::vector<TrainedModel>& models,
                                   const Dataset& points, int n_bins,
                                   double lo, double hi) {
  if (models.size() < 2) {
    throw std::invalid_argument("score_reference_band: need >= 2 models");
  }
  BandHistogram band;
  band.edges = Eigen::VectorXd::LinSpaced(n_bins + 1, lo, hi);
  Eigen::MatrixXd per_model(n_bins, static_cast<Eigen::Index>(models.size()));
  for (std::size_t m = 0; m < models.size(); ++m) {
    per_model.col(static_cast<Eigen::Index>(m)) =
        histogram_counts(classifier_scores(models[m], points), band.edges);
  }
  band.mean = per_model.rowwise().mean();
  const auto denom = static_cast<double>(models.size() - 1);
  band.stddev =
      ((per_model.colwise() - band.mean).array().square().rowwise().sum() /
       denom)
          .sqrt();
  return band;
}

namespace {

Eigen::VectorXd union_edges(const Dataset& a, const Dataset& b,
                            const Dataset& c, int dim, int bins) {
  double lo = std::min({a.points.col(dim).minCoeff(),
                        b.points.col(dim).minCoeff(),
                        c.points.col(dim).minCoeff()});
  double hi = std::max({a.points.col(dim).maxCoeff(),
                        b.points.col(dim).maxCoeff(),
                        c.points.col(dim).maxCoeff()});
  if (hi == lo) {
    lo -= 0.5;
    hi += 0.5;
  } else {
    const double pad = 0.01 * (hi - lo);
    lo -= pad;
    hi += pad;
  }
  return Eigen::VectorXd::LinSpaced(bins + 1, lo, hi);
}

Eigen::MatrixXd histogram2d(const Eigen::VectorXd& x, const Eigen::VectorXd& y,
                            const Eigen::VectorXd& x_edges,
                            const Eigen::VectorXd& y_edges,
                            const Eigen::VectorXd* weights) {
  const auto nx = x_edges.size() - 1;
  const auto ny = y_edges.size() - 1;
  const double wx = (x_edges[nx] - x_edges[0]) / static_cast<double>(nx);
  const double wy = (y_edges[ny] - y_edges[0]) / static_cast<double>(ny);
  Eigen::MatrixXd counts = Eigen::MatrixXd::Zero(nx, ny);
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    auto bx = static_cast<Eigen::Index>((x[i] - x_edges[0]) / wx);
    auto by = static_cast<Eigen::Index>((y[i] - y_edges[0]) / wy);
    bx = std::clamp<Eigen::Index>(bx, 0, nx - 1);
    by = std::clamp<Eigen::Index>(by, 0, ny - 1);
    counts(bx, by) += weights ? (*weights)[i] : 1.0;
  }
  return counts;
}

}  // namespace

HistogramBundle corner_data(const Dataset& reference, const Dataset& data,
                            const Dataset& selected, int bins_per_dim,
                            const Eigen::VectorXd* ref_weights) {
  if (reference.dim() != data.dim() || reference.dim() != selected.dim()) {
    throw std::invalid_argument("corner_data: dimension mismatch");
  }
  if (bins_per_dim < 2) {
    throw std::invalid_argument("corner_data: bins_per_dim must be >= 2");
  }
  if (ref_weights && ref_weights->size() != reference.n()) {
    throw std::invalid_argument("corner_data: weights length mismatch");
  }
  const int d = static_cast<int>(reference.dim());
  const Dataset* sources[3] = {&reference, &data, &selected};

  HistogramBundle bundle;
  bundle.weighted_reference = ref_weights != nullptr;
  bundle.totals = {ref_weights ? ref_weights->sum()
                               : static_cast<double>(reference.n()),
                   static_cast<double>(data.n()),
                   static_cast<double>(selected.n())};

  std::vector<Eigen::VectorXd> edges(static_cast<std::size_t>(d));
  for (int j = 0; j < d; ++j) {
    edges[static_cast<std::size_t>(j)] =
        union_edges(reference, data, selected, j, bins_per_dim);
  }

  for (int j = 0; j < d; ++j) {
    HistogramBundle::Marginal marginal;
    marginal.dim = j;
    marginal.edges = edges[static_cast<std::size_t>(j)];
    for (int s = 0; s < 3; ++s) {
      const Eigen::VectorXd column = sources[s]->points.col(j);
      marginal.counts[static_cast<std::size_t>(s)] = histogram_counts(
          column, marginal.edges, s == 0 ? ref_weights : nullptr);
    }
    bundle.marginals.push_back(std::move(marginal));
  }
  for (int jx = 0; jx < d; ++jx) {
    for (int jy = jx + 1; jy < d; ++jy) {
      HistogramBundle::Pair pair;
      pair.dim_x = jx;
      pair.dim_y = jy;
      pair.x_edges = edges[static_cast<std::size_t>(jx)];
      pair.y_edges = edges[static_cast<std::size_t>(jy)];
      for (int s = 0; s < 3; ++s) {
        pair.counts[static_cast<std::size_t>(s)] = histogram2d(
            sources[s]->points.col(jx), sources[s]->points.col(jy),
            pair.x_edges, pair.y_edges, s == 0 ? ref_weights : nullptr);
      }
      bundle.pairs.push_back(std::move(pair));
    }
  }
  return bundle;
}

}  // namespace nplm
