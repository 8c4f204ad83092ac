#include "nplm/io.hpp"

#include <bit>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

namespace nplm {

static_assert(std::endian::native == std::endian::little,
              "binary dataset format assumes a little-endian host");

namespace {

constexpr char kMagic[5] = {'N', 'P', 'L', 'M', '1'};

[[noreturn]] void fail_io(const std::string& path, const std::string& what) {
  throw io_error(path + ": " + what);
}

std::string format_double(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

bool parse_double(std::string_view token, double& out) {
  const char* first = token.data();
  const char* last = token.data() + token.size();
  const auto res = std::from_chars(first, last, out);
  return res.ec == std::errc{} && res.ptr == last;
}

json vector_to_json(const Eigen::VectorXd& v) {
  json arr = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) arr.push_back(v[i]);
  return arr;
}

Eigen::VectorXd vector_from_json(const json& arr) {
  Eigen::VectorXd v(arr.size());
  for (std::size_t i = 0; i < arr.size(); ++i) {
    v[static_cast<Eigen::Index>(i)] = arr[i].get<double>();
  }
  return v;
}

json matrix_to_json(const Eigen::MatrixXd& m) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

Eigen::MatrixXd matrix_from_json(const json& rows) {
  const auto n = static_cast<Eigen::Index>(rows.size());
  if (n == 0) return Eigen::MatrixXd(0, 0);
  const auto d = static_cast<Eigen::Index>(rows[0].size());
  Eigen::MatrixXd m(n, d);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& row = rows[static_cast<std::size_t>(i)];
    if (static_cast<Eigen::Index>(row.size()) != d) {
      throw io_error("ragged matrix in JSON document");
    }
    for (Eigen::Index j = 0; j < d; ++j) {
      m(i, j) = row[static_cast<std::size_t>(j)].get<double>();
    }
  }
  return m;
}

void require_schema(const json& j, std::string_view expected) {
  if (!j.contains("schema")) return;  // tolerated for hand-written inputs
  const auto got = j.at("schema").get<std::string>();
  if (got != expected) {
    throw io_error("unexpected schema '" + got + "', wanted '" +
                   std::string(expected) + "'");
  }
}

void assert_finite(const json& j, const std::string& where) {
  if (j.is_number_float() && !std::isfinite(j.get<double>())) {
    throw io_error("non-finite number at " + where +
                   "; refusing to write a lossy document");
  }
  if (j.is_object()) {
    for (const auto& [key, value] : j.items()) {
      assert_finite(value, where + "." + key);
    }
  } else if (j.is_array()) {
    for (std::size_t i = 0; i < j.size(); ++i) {
      assert_finite(j[i], where + "[" + std::to_string(i) + "]");
    }
  }
}

Dataset read_dataset_text(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail_io(path, "cannot open for reading");
  std::string line;
  std::vector<double> values;
  Eigen::Index dim = 0;
  Eigen::Index n_rows = 0;
  std::string label;
  std::optional<std::uint64_t> seed;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::string_view view(line);
    while (!view.empty() && (view.front() == ' ' || view.front() == '\t')) {
      view.remove_prefix(1);
    }
    if (view.empty()) continue;
    if (view.front() == '#') {
      if (view.rfind("# label: ", 0) == 0) label = std::string(view.substr(9));
      if (view.rfind("# seed: ", 0) == 0) {
        std::uint64_t s = 0;
        const auto tok = view.substr(8);
        if (std::from_chars(tok.data(), tok.data() + tok.size(), s).ec ==
            std::errc{}) {
          seed = s;
        }
      }
      continue;
    }
    Eigen::Index col = 0;
    std::size_t pos = 0;
    while (pos < view.size()) {
      while (pos < view.size() &&
             (view[pos] == ',' || view[pos] == ' ' || view[pos] == '\t' ||
              view[pos] == '\r')) {
        ++pos;
      }
      if (pos >= view.size()) break;
      std::size_t end = pos;
      while (end < view.size() && view[end] != ',' && view[end] != ' ' &&
             view[end] != '\t' && view[end] != '\r') {
        ++end;
      }
      double v = 0.0;
      if (!parse_double(view.substr(pos, end - pos), v)) {
        fail_io(path, "line " + std::to_string(line_no) + ", column " +
                          std::to_string(col + 1) + ": cannot parse '" +
                          std::string(view.substr(pos, end - pos)) + "'");
      }
      if (!std::isfinite(v)) {
        fail_io(path, "line " + std::to_string(line_no) + ", column " +
                          std::to_string(col + 1) + ": non-finite value");
      }
      values.push_back(v);
      ++col;
      pos = end;
    }
    if (col == 0) continue;
    if (dim == 0) {
      dim = col;
    } else if (col != dim) {
      fail_io(path, "line " + std::to_string(line_no) + ": expected " +
                        std::to_string(dim) + " columns, got " +
                        std::to_string(col));
    }
    ++n_rows;
  }
  if (n_rows == 0) fail_io(path, "no data rows found");
  Eigen::MatrixXd points(n_rows, dim);
  for (Eigen::Index i = 0; i < n_rows; ++i) {
    for (Eigen::Index j = 0; j < dim; ++j) {
      points(i, j) = values[static_cast<std::size_t>(i * dim + j)];
    }
  }
  return Dataset{std::move(points), std::move(label), seed};
}

Dataset read_dataset_binary(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail_io(path, "cannot open for reading");
  char magic[5];
  in.read(magic, 5);
  if (!in || std::memcmp(magic, kMagic, 5) != 0) {
    fail_io(path, "bad magic; not an NPLM1 binary dataset");
  }
  std::uint32_t n = 0, dim = 0;
  in.read(reinterpret_cast<char*>(&n), 4);
  in.read(reinterpret_cast<char*>(&dim), 4);
  if (!in || n == 0 || dim == 0) fail_io(path, "bad header counts");
  Eigen::MatrixXd points(n, dim);
  std::vector<double> row(dim);
  for (std::uint32_t i = 0; i < n; ++i) {
    in.read(reinterpret_cast<char*>(row.data()),
            static_cast<std::streamsize>(dim * sizeof(double)));
    if (!in) {
      fail_io(path, "truncated at row " + std::to_string(i));
    }
    for (std::uint32_t j = 0; j < dim; ++j) {
      if (!std::isfinite(row[j])) {
        fail_io(path, "non-finite value at row " + std::to_string(i) +
                          ", column " + std::to_string(j));
      }
      points(i, j) = row[j];
    }
  }
  return Dataset{std::move(points), {}, std::nullopt};
}

}  // namespace

DataFormat sniff_format(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail_io(path, "cannot open for reading");
  char magic[5] = {};
  in.read(magic, 5);
  return (in && std::memcmp(magic, kMagic, 5) == 0) ? DataFormat::Binary
                                                    : DataFormat::DelimitedText;
}

Dataset read_dataset(const std::string& path, DataFormat format) {
  if (format == DataFormat::Auto) format = sniff_format(path);
  Dataset d = format == DataFormat::Binary ? read_dataset_binary(path)
                                           : read_dataset_text(path);
  return d;
}

void write_dataset(const Dataset& d, const std::string& path,
                   DataFormat format) {
  validate(d);
  if (format == DataFormat::Binary) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) fail_io(path, "cannot open for writing");
    out.write(kMagic, 5);
    const auto n = static_cast<std::uint32_t>(d.n());
    const auto dim = static_cast<std::uint32_t>(d.dim());
    out.write(reinterpret_cast<const char*>(&n), 4);
    out.write(reinterpret_cast<const char*>(&dim), 4);
    std::vector<double> row(dim);
    for (Eigen::Index i = 0; i < d.n(); ++i) {
      for (Eigen::Index j = 0; j < d.dim(); ++j) row[static_cast<std::size_t>(j)] = d.points(i, j);
      out.write(reinterpret_cast<const char*>(row.data()),
                static_cast<std::streamsize>(dim * sizeof(double)));
    }
    if (!out) fail_io(path, "write failed");
    return;
  }
  std::ofstream out(path, std::ios::trunc);
  if (!out) fail_io(path, "cannot open for writing");
  if (!d.label.empty()) out << "# label: " << d.label << "\n";
  if (d.seed) out << "# seed: " << *d.seed << "\n";
  for (Eigen::Index i = 0; i < d.n(); ++i) {
    for (Eigen::Index j = 0; j < d.dim(); ++j) {
      if (j) out << ',';
      out << format_double(d.points(i, j));
    }
    out << '\n';
  }
  if (!out) fail_io(path, "write failed");
}

void to_json(json& j, const NplmConfig& c) {
  j = json{{"n_centers", c.n_centers},
           {"kernel_width", c.kernel_width},
           {"regularization", c.regularization},
           {"expected_count", c.expected_count},
           {"newton_tol", c.newton_tol},
           {"newton_max_iter", c.newton_max_iter},
           {"cg_max_iter", c.cg_max_iter},
           {"master_seed", c.master_seed}};
}

void from_json(const json& j, NplmConfig& c) {
  j.at("n_centers").get_to(c.n_centers);
  j.at("kernel_width").get_to(c.kernel_width);
  j.at("regularization").get_to(c.regularization);
  c.expected_count = j.value("expected_count", 0.0);
  c.newton_tol = j.value("newton_tol", 1e-6);
  c.newton_max_iter = j.value("newton_max_iter", 50);
  c.cg_max_iter = j.value("cg_max_iter", 500);
  c.master_seed = j.value("master_seed", std::uint64_t{0});
}

void to_json(json& j, const PipelineConfig& c) {
  j = json{{"schema", "nplm.config/1"},
           {"nplm", c.nplm},
           {"standardize", c.standardize},
           {"toy_size", c.toy_size}};
}

void from_json(const json& j, PipelineConfig& c) {
  require_schema(j, "nplm.config/1");
  j.at("nplm").get_to(c.nplm);
  c.standardize = j.value("standardize", true);
  c.toy_size = j.value("toy_size", std::int64_t{0});
}

void to_json(json& j, const RunManifest& m) {
  json inputs = json::array();
  for (const auto& [path, fp] : m.inputs) {
    inputs.push_back(json{{"path", path}, {"fingerprint", fp}});
  }
  j = json{{"schema", "nplm.manifest/1"},
           {"command", m.command},
           {"config", m.config},
           {"inputs", inputs},
           {"outputs", m.outputs},
           {"seeds", m.seeds},
           {"version", m.version},
           {"wall_time_seconds", m.wall_time_seconds}};
}

void from_json(const json& j, RunManifest& m) {
  require_schema(j, "nplm.manifest/1");
  j.at("command").get_to(m.command);
  m.config = j.value("config", json::object());
  m.inputs.clear();
  for (const auto& item : j.value("inputs", json::array())) {
    m.inputs.emplace_back(item.at("path").get<std::string>(),
                          item.at("fingerprint").get<std::string>());
  }
  m.outputs = j.value("outputs", std::vector<std::string>{});
  m.seeds = j.value("seeds", std::vector<std::uint64_t>{});
  m.version = j.value("version", std::string{});
  m.wall_time_seconds = j.value("wall_time_seconds", 0.0);
}

void to_json(json& j, const TestReport& r) {
  j = json{{"schema", "nplm.test_report/1"},
           {"t_obs", r.t_obs},
           {"p_empirical", r.p_empirical},
           {"p_chi2", r.p_chi2},
           {"z_score", r.z_score},
           {"z_empirical", r.z_empirical},
           {"z_empirical_saturated", r.z_empirical_saturated},
           {"seeds", r.seeds},
           {"direction", std::string(to_string(r.direction))}};
  if (r.alpha) j["alpha"] = *r.alpha;
  if (r.decision) j["decision"] = *r.decision;
}

void from_json(const json& j, TestReport& r) {
  require_schema(j, "nplm.test_report/1");
  j.at("t_obs").get_to(r.t_obs);
  j.at("p_empirical").get_to(r.p_empirical);
  j.at("p_chi2").get_to(r.p_chi2);
  j.at("z_score").get_to(r.z_score);
  r.z_empirical = j.value("z_empirical", 0.0);
  r.z_empirical_saturated = j.value("z_empirical_saturated", false);
  r.alpha = j.contains("alpha")
                ? std::optional<double>(j.at("alpha").get<double>())
                : std::nullopt;
  r.decision = j.contains("decision")
                   ? std::optional<bool>(j.at("decision").get<bool>())
                   : std::nullopt;
  r.seeds = j.value("seeds", std::vector<std::uint64_t>{});
  r.direction =
      direction_from_string(j.value("direction", std::string("true-as-ref")));
}

void to_json(json& j, const ValidationSummary& s) {
  j = json{{"schema", "nplm.validation_summary/1"},
           {"z_median", s.z_median},
           {"ci68_low", s.ci68_low},
           {"ci68_high", s.ci68_high},
           {"n_repeats", s.n_repeats},
           {"reports", s.per_repeat_reports}};
}

void from_json(const json& j, ValidationSummary& s) {
  require_schema(j, "nplm.validation_summary/1");
  j.at("z_median").get_to(s.z_median);
  j.at("ci68_low").get_to(s.ci68_low);
  j.at("ci68_high").get_to(s.ci68_high);
  j.at("n_repeats").get_to(s.n_repeats);
  s.per_repeat_reports =
      j.value("reports", std::vector<TestReport>{});
}

void to_json(json& j, const NullModel& n) {
  j = json{{"schema", "nplm.null_model/1"},
           {"toy_values", n.toy_values},
           {"chi2_dof", n.chi2_dof},
           {"ks_pvalue", n.ks_pvalue},
           {"n_toys", n.n_toys},
           {"config_fingerprint", fingerprint_hex(n.config_fingerprint)},
           {"reference_fingerprint", fingerprint_hex(n.reference_fingerprint)},
           {"n_failed", n.n_failed},
           {"overlap_warning", n.overlap_warning}};
}

namespace {
std::uint64_t parse_fingerprint(const std::string& hex) {
  std::uint64_t value = 0;
  const auto res =
      std::from_chars(hex.data(), hex.data() + hex.size(), value, 16);
  if (res.ec != std::errc{} || res.ptr != hex.data() + hex.size()) {
    throw io_error("bad fingerprint string '" + hex + "'");
  }
  return value;
}
}  // namespace

void from_json(const json& j, NullModel& n) {
  require_schema(j, "nplm.null_model/1");
  j.at("toy_values").get_to(n.toy_values);
  j.at("chi2_dof").get_to(n.chi2_dof);
  j.at("ks_pvalue").get_to(n.ks_pvalue);
  j.at("n_toys").get_to(n.n_toys);
  n.config_fingerprint =
      parse_fingerprint(j.at("config_fingerprint").get<std::string>());
  n.reference_fingerprint = parse_fingerprint(
      j.value("reference_fingerprint", std::string(16, '0')));
  n.n_failed = j.value("n_failed", 0);
  n.overlap_warning = j.value("overlap_warning", false);
}

void to_json(json& j, const ScanResult& s) {
  json points = json::array();
  for (const auto& p : s.points) {
    json jp{{"m", p.m},
            {"lambda", p.lambda},
            {"seconds_per_toy", p.seconds_per_toy},
            {"stable", p.stable},
            {"flag", p.flag}};
    if (std::isfinite(p.median_t)) {
      jp["median_t"] = p.median_t;
    } else {
      jp["median_t"] = nullptr;
    }
    points.push_back(std::move(jp));
  }
  j = json{{"schema", "nplm.scan_result/1"}, {"points", points}};
}

void from_json(const json& j, ScanResult& s) {
  require_schema(j, "nplm.scan_result/1");
  s.points.clear();
  for (const auto& jp : j.at("points")) {
    ScanResult::Point p;
    jp.at("m").get_to(p.m);
    jp.at("lambda").get_to(p.lambda);
    p.median_t = jp.at("median_t").is_null()
                     ? std::numeric_limits<double>::quiet_NaN()
                     : jp.at("median_t").get<double>();
    jp.at("seconds_per_toy").get_to(p.seconds_per_toy);
    jp.at("stable").get_to(p.stable);
    p.flag = jp.value("flag", std::string{});
    s.points.push_back(std::move(p));
  }
}

void to_json(json& j, const MoGSpec& s) {
  j = json{{"schema", "nplm.mog_spec/1"},
           {"dim", s.dim},
           {"n_components", s.n_components},
           {"means", matrix_to_json(s.means)},
           {"stds", matrix_to_json(s.stds)},
           {"mixture_probs", vector_to_json(s.mixture_probs)},
           {"seed", s.seed}};
}

void from_json(const json& j, MoGSpec& s) {
  require_schema(j, "nplm.mog_spec/1");
  j.at("dim").get_to(s.dim);
  j.at("n_components").get_to(s.n_components);
  s.means = matrix_from_json(j.at("means"));
  s.stds = matrix_from_json(j.at("stds"));
  s.mixture_probs = vector_from_json(j.at("mixture_probs"));
  j.at("seed").get_to(s.seed);
  validate(s);
}

void to_json(json& j, const TrainedModel& m) {
  j = json{{"schema", "nplm.model/1"},
           {"centers", matrix_to_json(m.centers)},
           {"weights", vector_to_json(m.weights)},
           {"kernel_width", m.kernel_width},
           {"ref_count", m.ref_count},
           {"data_count", m.data_count},
           {"expected_count", m.expected_count},
           {"converged", m.converged},
           {"iterations_used", m.iterations_used}};
}

void from_json(const json& j, TrainedModel& m) {
  require_schema(j, "nplm.model/1");
  m.centers = matrix_from_json(j.at("centers"));
  m.weights = vector_from_json(j.at("weights"));
  j.at("kernel_width").get_to(m.kernel_width);
  j.at("ref_count").get_to(m.ref_count);
  j.at("data_count").get_to(m.data_count);
  j.at("expected_count").get_to(m.expected_count);
  j.at("converged").get_to(m.converged);
  j.at("iterations_used").get_to(m.iterations_used);
}

namespace {
const char* kSourceNames[3] = {"reference", "data", "selected"};
}

void to_json(json& j, const HistogramBundle& b) {
  json marginals = json::array();
  for (const auto& m : b.marginals) {
    json counts;
    for (int s = 0; s < 3; ++s) {
      counts[kSourceNames[s]] =
          vector_to_json(m.counts[static_cast<std::size_t>(s)]);
    }
    marginals.push_back(json{{"dim", m.dim},
                             {"edges", vector_to_json(m.edges)},
                             {"counts", counts}});
  }
  json pairs = json::array();
  for (const auto& p : b.pairs) {
    json counts;
    for (int s = 0; s < 3; ++s) {
      counts[kSourceNames[s]] =
          matrix_to_json(p.counts[static_cast<std::size_t>(s)]);
    }
    pairs.push_back(json{{"dim_x", p.dim_x},
                         {"dim_y", p.dim_y},
                         {"x_edges", vector_to_json(p.x_edges)},
                         {"y_edges", vector_to_json(p.y_edges)},
                         {"counts", counts}});
  }
  j = json{{"schema", "nplm.histogram_bundle/1"},
           {"marginals", marginals},
           {"pairs", pairs},
           {"weighted_reference", b.weighted_reference},
           {"totals",
            json{{"reference", b.totals[0]},
                 {"data", b.totals[1]},
                 {"selected", b.totals[2]}}}};
}

void from_json(const json& j, HistogramBundle& b) {
  require_schema(j, "nplm.histogram_bundle/1");
  b.marginals.clear();
  b.pairs.clear();
  for (const auto& jm : j.at("marginals")) {
    HistogramBundle::Marginal m;
    jm.at("dim").get_to(m.dim);
    m.edges = vector_from_json(jm.at("edges"));
    for (int s = 0; s < 3; ++s) {
      m.counts[static_cast<std::size_t>(s)] =
          vector_from_json(jm.at("counts").at(kSourceNames[s]));
    }
    b.marginals.push_back(std::move(m));
  }
  for (const auto& jp : j.at("pairs")) {
    HistogramBundle::Pair p;
    jp.at("dim_x").get_to(p.dim_x);
    jp.at("dim_y").get_to(p.dim_y);
    p.x_edges = vector_from_json(jp.at("x_edges"));
    p.y_edges = vector_from_json(jp.at("y_edges"));
    for (int s = 0; s < 3; ++s) {
      p.counts[static_cast<std::size_t>(s)] =
          matrix_from_json(jp.at("counts").at(kSourceNames[s]));
    }
    b.pairs.push_back(std::move(p));
  }
  b.weighted_reference = j.value("weighted_reference", false);
  if (j.contains("totals")) {
    b.totals[0] = j.at("totals").value("reference", 0.0);
    b.totals[1] = j.at("totals").value("data", 0.0);
    b.totals[2] = j.at("totals").value("selected", 0.0);
  }
}

void to_json(json& j, const BandHistogram& b) {
  j = json{{"schema", "nplm.score_band/1"},
           {"edges", vector_to_json(b.edges)},
           {"mean", vector_to_json(b.mean)},
           {"stddev", vector_to_json(b.stddev)}};
}

void from_json(const json& j, BandHistogram& b) {
  require_schema(j, "nplm.score_band/1");
  b.edges = vector_from_json(j.at("edges"));
  b.mean = vector_from_json(j.at("mean"));
  b.stddev = vector_from_json(j.at("stddev"));
}

void write_json_file(const json& doc, const std::string& path) {
  assert_finite(doc, "$");
  std::ofstream out(path, std::ios::trunc);
  if (!out) fail_io(path, "cannot open for writing");
  out << doc.dump(2) << '\n';
  if (!out) fail_io(path, "write failed");
}

json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail_io(path, "cannot open for reading");
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    fail_io(path, std::string("JSON parse error: ") + e.what());
  }
}

}  // namespace nplm
