#include "nplm/types.hpp"

#include <cmath>
#include <sstream>

namespace nplm {

void validate(const Dataset& d) {
  if (d.points.rows() < 1) {
    throw std::invalid_argument("dataset must contain at least one point");
  }
  for (Eigen::Index i = 0; i < d.points.rows(); ++i) {
    for (Eigen::Index j = 0; j < d.points.cols(); ++j) {
      if (!std::isfinite(d.points(i, j))) {
        std::ostringstream msg;
        msg << "dataset '" << d.label << "': non-finite coordinate at row " << i
            << ", column " << j;
        throw std::invalid_argument(msg.str());
      }
    }
  }
}

Dataset make_dataset(Eigen::MatrixXd points, std::string label,
                     std::optional<std::uint64_t> seed) {
  Dataset d{std::move(points), std::move(label), seed};
  validate(d);
  return d;
}

void validate(const NplmConfig& c) {
  if (c.n_centers < 1) throw std::invalid_argument("n_centers must be >= 1");
  if (!(c.kernel_width > 0.0)) {
    throw std::invalid_argument("kernel_width must be > 0");
  }
  if (!(c.regularization > 0.0)) {
    throw std::invalid_argument("regularization must be > 0");
  }
  if (c.expected_count < 0.0) {
    throw std::invalid_argument("expected_count must be >= 0");
  }
  if (!(c.newton_tol > 0.0)) {
    throw std::invalid_argument("newton_tol must be > 0");
  }
  if (c.newton_max_iter < 1 || c.cg_max_iter < 1) {
    throw std::invalid_argument("iteration limits must be >= 1");
  }
}

std::string_view to_string(Direction d) {
  return d == Direction::TrueAsReference ? "true-as-ref" : "gen-as-ref";
}

Direction direction_from_string(std::string_view s) {
  if (s == "true-as-ref") return Direction::TrueAsReference;
  if (s == "gen-as-ref") return Direction::GeneratorAsReference;
  throw std::invalid_argument("unknown direction: " + std::string(s));
}

std::uint64_t dataset_fingerprint(const Dataset& d) {
  Fnv1a h;
  h.add(static_cast<std::int64_t>(d.points.rows()));
  h.add(static_cast<std::int64_t>(d.points.cols()));
  for (Eigen::Index i = 0; i < d.points.rows(); ++i) {
    for (Eigen::Index j = 0; j < d.points.cols(); ++j) {
      h.add(d.points(i, j));
    }
  }
  return h.value();
}

std::uint64_t config_fingerprint(const NplmConfig& c, std::int64_t n_ref,
                                 std::int64_t toy_size, bool standardized) {
  Fnv1a h;
  h.add(std::string_view("nplm-config"));
  h.add(static_cast<std::int64_t>(c.n_centers));
  h.add(c.kernel_width);
  h.add(c.regularization);
  h.add(n_ref);
  h.add(toy_size);
  h.add(static_cast<std::uint64_t>(standardized ? 1 : 0));
  h.add(kVersion);
  return h.value();
}

std::string fingerprint_hex(std::uint64_t fp) {
  static const char* digits = "0123456789abcdef";
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i) {
    out[static_cast<std::size_t>(i)] = digits[fp & 0xf];
    fp >>= 4;
  }
  return out;
}

}  // namespace nplm
