#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <cstring>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace nplm {

inline constexpr std::string_view kVersion = "0.1.0";

using RowMatrixXd =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// Thrown when an iteration produces non-finite values or a statistical
// procedure cannot continue (distinct from bad user input).
struct numeric_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct io_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// A sample of d-dimensional points, one row per point, with provenance.
struct Dataset {
  Eigen::MatrixXd points;  // n_points x dim
  std::string label;
  std::optional<std::uint64_t> seed;

  Eigen::Index n() const { return points.rows(); }
  Eigen::Index dim() const { return points.cols(); }
};

// Throws std::invalid_argument naming the offending row/column.
void validate(const Dataset& d);

Dataset make_dataset(Eigen::MatrixXd points, std::string label = {},
                     std::optional<std::uint64_t> seed = std::nullopt);

// Test hyperparameters and solver knobs. expected_count = 0 means "use the
// data sample size", which is also what the fit does regardless; the field is
// kept for forward compatibility only.
struct NplmConfig {
  int n_centers = 100;           // M
  double kernel_width = 1.0;     // sigma
  double regularization = 1e-6;  // lambda
  double expected_count = 0.0;
  double newton_tol = 1e-6;      // relative gradient-norm stopping threshold
  int newton_max_iter = 50;
  int cg_max_iter = 500;
  std::uint64_t master_seed = 0;
};

void validate(const NplmConfig& c);

// A fitted log-ratio model: f(x) = sum_i weights[i] * k_sigma(x, centers[i]).
struct TrainedModel {
  Eigen::MatrixXd centers;  // M x dim
  Eigen::VectorXd weights;  // M
  double kernel_width = 0.0;
  std::int64_t ref_count = 0;
  std::int64_t data_count = 0;
  double expected_count = 0.0;
  bool converged = false;
  int iterations_used = 0;
};

// Null distribution summary built from pseudo-experiments.
struct NullModel {
  std::vector<double> toy_values;  // sorted ascending, failed toys excluded
  double chi2_dof = 0.0;
  double ks_pvalue = 0.0;
  int n_toys = 0;
  std::uint64_t config_fingerprint = 0;
  std::uint64_t reference_fingerprint = 0;  // advisory, see run_validation
  int n_failed = 0;
  bool overlap_warning = false;
};

enum class Direction { TrueAsReference, GeneratorAsReference };

std::string_view to_string(Direction d);
Direction direction_from_string(std::string_view s);

struct TestReport {
  double t_obs = 0.0;
  double p_empirical = 1.0;
  double p_chi2 = 1.0;
  double z_score = 0.0;  // from the chi2 route
  double z_empirical = 0.0;
  bool z_empirical_saturated = false;
  std::optional<double> alpha;
  std::optional<bool> decision;  // t_obs >= t_alpha
  std::vector<std::uint64_t> seeds;
  Direction direction = Direction::TrueAsReference;
};

struct ValidationSummary {
  double z_median = 0.0;
  double ci68_low = 0.0;
  double ci68_high = 0.0;
  std::vector<TestReport> per_repeat_reports;
  int n_repeats = 0;
};

// FNV-1a over a canonical byte encoding; stable across runs and platforms
// of the same endianness.
class Fnv1a {
 public:
  void add_bytes(const void* data, std::size_t n) {
    auto p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < n; ++i) {
      hash_ ^= p[i];
      hash_ *= 0x100000001b3ull;
    }
  }
  void add(double v) { add_bytes(&v, sizeof v); }
  void add(std::uint64_t v) { add_bytes(&v, sizeof v); }
  void add(std::int64_t v) { add_bytes(&v, sizeof v); }
  void add(std::string_view s) { add_bytes(s.data(), s.size()); }
  std::uint64_t value() const { return hash_; }

 private:
  std::uint64_t hash_ = 0xcbf29ce484222325ull;
};

std::uint64_t dataset_fingerprint(const Dataset& d);

// A null model is only valid for the exact test configuration it was built
// with: this identifies (M, sigma, lambda, N_ref, toy size, standardization,
// version).
std::uint64_t config_fingerprint(const NplmConfig& c, std::int64_t n_ref,
                                 std::int64_t toy_size, bool standardized);

std::string fingerprint_hex(std::uint64_t fp);

}  // namespace nplm
