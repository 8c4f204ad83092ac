#pragma once

#include <optional>
#include <string>
#include <vector>

#include "nplm/calibration.hpp"
#include "nplm/types.hpp"

namespace nplm {

// Column-wise affine map fitted on the reference sample only and applied
// identically to both samples.
struct Standardizer {
  Eigen::RowVectorXd mean;
  Eigen::RowVectorXd scale;  // per-column standard deviation, floored
};

Standardizer reference_standardizer(const Dataset& reference);
Dataset standardize(const Standardizer& s, const Dataset& d);

// Percentile of the Euclidean pairwise distances of a uniform subsample of
// at most `subsample` points. Default 90th percentile.
double select_sigma(const Dataset& reference_sample, double percentile = 90.0,
                    std::int64_t subsample = 5000, std::uint64_t seed = 0);

struct ScanResult {
  struct Point {
    int m = 0;
    double lambda = 0.0;
    double median_t = 0.0;
    double seconds_per_toy = 0.0;
    bool stable = false;
    std::string flag;  // empty when stable
  };
  std::vector<Point> points;
};

// Runs n_toys_per_point null toys for every (M, lambda) pair and records the
// median statistic, timing and stability flags.
ScanResult scan_grid(const Dataset& reference, const Dataset& toy_pool,
                     const NplmConfig& base,
                     const std::vector<std::pair<int, double>>& grid,
                     int n_toys_per_point, const ResamplingPolicy& policy,
                     int threads = 1);

ScanResult scan_m(const Dataset& reference, const Dataset& toy_pool,
                  const NplmConfig& base, const std::vector<int>& m_grid,
                  int n_toys_per_point, const ResamplingPolicy& policy,
                  int threads = 1);

// Smallest scanned M whose median is within kSaturationTolerance of the
// largest-M median.
inline constexpr double kSaturationTolerance = 0.05;
int saturation_m(const ScanResult& scan);

// Smallest lambda in the (descending) grid whose probe toys all converge
// with finite outputs within time_budget seconds per toy; falls back to the
// largest grid value with a warning on stderr.
double select_lambda(const Dataset& reference, const Dataset& toy_pool,
                     const NplmConfig& base,
                     const std::vector<double>& lambda_grid, int n_probe_toys,
                     double time_budget_seconds,
                     const ResamplingPolicy& policy, int threads = 1,
                     ScanResult* scan_out = nullptr);

// Hyperparameters published for the reference benchmarks. Presets skip
// standardization: their kernel widths are quoted for raw coordinates.
struct Preset {
  std::string name;
  int n_centers = 0;
  double kernel_width = 0.0;
  double regularization = 0.0;
  bool standardize = false;
};

std::optional<Preset> find_preset(std::string_view name);
std::vector<std::string> preset_names();

}  // namespace nplm
