#pragma once

#include <array>
#include <vector>

#include "nplm/statistic.hpp"
#include "nplm/types.hpp"

namespace nplm {

// Per-point classifier score 1 / (1 + e^-f); near 1 flags overdensities,
// near 0 underdensities.
Eigen::VectorXd classifier_scores(const TrainedModel& model,
                                  const Dataset& points);

// The ceil(q*n) points with the most extreme scores. Ties keep original
// index order; bottom=true selects the low-score tail instead.
Dataset select_top_quantile(const Dataset& points,
                            const Eigen::VectorXd& scores, double q,
                            bool bottom = false);

// e^f per reference point: the factor deforming the reference density into
// the learned data density.
Eigen::VectorXd reweight_reference(const TrainedModel& model,
                                   const Dataset& reference,
                                   ClampCounter* counter = nullptr);

struct BandHistogram {
  Eigen::VectorXd edges;   // n_bins + 1
  Eigen::VectorXd mean;    // per-bin mean count across models
  Eigen::VectorXd stddev;  // per-bin sample standard deviation
};

// Score histogram band over a pool of null-toy models evaluated on the same
// points.
BandHistogram score_reference_band(const std::vector<TrainedModel>& models,
                                   const Dataset& points, int n_bins = 40,
                                   double lo = 0.0, double hi = 1.0);

Eigen::VectorXd histogram_counts(const Eigen::VectorXd& values,
                                 const Eigen::VectorXd& edges,
                                 const Eigen::VectorXd* weights = nullptr);

// Plot-ready marginal and pairwise histograms for up to three overlaid
// sources sharing common bin edges.
struct HistogramBundle {
  static constexpr int kReference = 0;
  static constexpr int kData = 1;
  static constexpr int kSelected = 2;

  struct Marginal {
    int dim = 0;
    Eigen::VectorXd edges;
    std::array<Eigen::VectorXd, 3> counts;
  };
  struct Pair {
    int dim_x = 0;
    int dim_y = 0;
    Eigen::VectorXd x_edges;
    Eigen::VectorXd y_edges;
    std::array<Eigen::MatrixXd, 3> counts;  // x bins by y bins
  };

  std::vector<Marginal> marginals;
  std::vector<Pair> pairs;
  bool weighted_reference = false;
  std::array<double, 3> totals = {0.0, 0.0, 0.0};
};

// Bin edges come from the union range per dimension, padded by 1%.
// ref_weights, when given, weight the reference counts (e.g. e^f factors).
HistogramBundle corner_data(const Dataset& reference, const Dataset& data,
                            const Dataset& selected, int bins_per_dim = 40,
                            const Eigen::VectorXd* ref_weights = nullptr);

}  // namespace nplm
