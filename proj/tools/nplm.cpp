// Command-line driver for the NPLM goodness-of-fit pipeline:
//   gen-mog -> select-hyper -> calibrate -> test / validate / diagnose / scan
// Exit codes: 0 success, 1 usage error, 2 numerical failure, 3 I/O failure.

#include <CLI11.hpp>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "nplm/calibration.hpp"
#include "nplm/diagnostics.hpp"
#include "nplm/io.hpp"
#include "nplm/model_selection.hpp"
#include "nplm/mog.hpp"
#include "nplm/parallel.hpp"
#include "nplm/rng.hpp"

namespace fs = std::filesystem;
using namespace nplm;
using clock_type = std::chrono::steady_clock;

namespace {

struct GlobalOptions {
  std::uint64_t seed = 0;
  bool seed_given = false;
  int threads = 0;
  std::string format = "text";
  bool format_given = false;
  std::string direction = "true-as-ref";
};

DataFormat parse_format(const std::string& name) {
  if (name == "text") return DataFormat::DelimitedText;
  if (name == "binary") return DataFormat::Binary;
  if (name == "auto") return DataFormat::Auto;
  throw CLI::ValidationError("--format", "must be text, binary or auto");
}

std::string file_fingerprint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw io_error(path + ": cannot open for fingerprinting");
  Fnv1a h;
  char buf[65536];
  while (in.read(buf, sizeof buf) || in.gcount() > 0) {
    h.add_bytes(buf, static_cast<std::size_t>(in.gcount()));
  }
  return fingerprint_hex(h.value());
}

Dataset load_dataset(const std::string& path, const GlobalOptions& g,
                     RunManifest& manifest) {
  // reads default to sniffing unless a format was forced
  const DataFormat fmt =
      g.format_given ? parse_format(g.format) : DataFormat::Auto;
  Dataset d = read_dataset(path, fmt);
  manifest.inputs.emplace_back(path, fingerprint_hex(dataset_fingerprint(d)));
  return d;
}

PipelineConfig load_config(const std::string& path, const GlobalOptions& g,
                           RunManifest& manifest) {
  PipelineConfig c = read_report<PipelineConfig>(path);
  manifest.inputs.emplace_back(path, file_fingerprint(path));
  if (g.seed_given) c.nplm.master_seed = g.seed;
  validate(c.nplm);
  return c;
}

json load_null_doc(const std::string& path, RunManifest& manifest) {
  json doc = read_json_file(path);
  manifest.inputs.emplace_back(path, file_fingerprint(path));
  return doc;
}

void finish_manifest(RunManifest& m, clock_type::time_point start) {
  m.wall_time_seconds =
      std::chrono::duration<double>(clock_type::now() - start).count();
}

json fingerprint_inputs_json(const NplmConfig& c, std::int64_t n_ref,
                             std::int64_t toy_size, bool standardized) {
  return json{{"n_centers", c.n_centers},
              {"kernel_width", c.kernel_width},
              {"regularization", c.regularization},
              {"n_ref", n_ref},
              {"toy_size", toy_size},
              {"standardize", standardized},
              {"version", std::string(kVersion)}};
}

// Checks the cached null against the current configuration and fails with a
// field-by-field diff on mismatch.
void require_matching_null(const NullModel& null, const json& null_doc,
                           const NplmConfig& config, std::int64_t n_ref,
                           std::int64_t toy_size, bool standardized) {
  const std::uint64_t current =
      config_fingerprint(config, n_ref, toy_size, standardized);
  if (current == null.config_fingerprint) return;
  std::ostringstream msg;
  msg << "null model fingerprint mismatch:\n"
      << "  cached:  " << fingerprint_hex(null.config_fingerprint) << "\n"
      << "  current: " << fingerprint_hex(current) << "\n";
  const json now =
      fingerprint_inputs_json(config, n_ref, toy_size, standardized);
  if (null_doc.contains("fingerprint_inputs")) {
    const json& was = null_doc.at("fingerprint_inputs");
    for (const auto& [key, value] : now.items()) {
      const json cached = was.contains(key) ? was.at(key) : json();
      if (cached != value) {
        msg << "  " << key << ": cached " << cached.dump() << ", current "
            << value.dump() << "\n";
      }
    }
  } else {
    msg << "  current inputs: " << now.dump() << "\n";
  }
  throw numeric_error(msg.str());
}

void warn_reference_mismatch(const NullModel& null, const Dataset& reference) {
  if (null.reference_fingerprint != 0 &&
      null.reference_fingerprint != dataset_fingerprint(reference)) {
    std::cerr << "[nplm] warning: null model was calibrated on a different "
                 "reference sample\n";
  }
}

struct DirectionalInputs {
  Dataset reference;
  Dataset data;
  Direction direction;
};

// --direction picks which of (true sample, generated sample) plays the
// reference role; the other becomes the sample under test.
DirectionalInputs resolve_direction(Dataset true_sample, Dataset gen_sample,
                                    const std::string& direction) {
  const Direction dir = direction_from_string(direction);
  if (dir == Direction::TrueAsReference) {
    return {std::move(true_sample), std::move(gen_sample), dir};
  }
  return {std::move(gen_sample), std::move(true_sample), dir};
}

void apply_standardization(bool enabled, Dataset& reference, Dataset& other) {
  if (!enabled) return;
  const Standardizer s = reference_standardizer(reference);
  reference = standardize(s, reference);
  other = standardize(s, other);
}

std::vector<int> parse_int_grid(const std::string& csv) {
  std::vector<int> out;
  std::stringstream ss(csv);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(std::stoi(item));
  }
  return out;
}

std::vector<double> parse_double_grid(const std::string& csv) {
  std::vector<double> out;
  std::stringstream ss(csv);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(std::stod(item));
  }
  return out;
}

std::string join_args(int argc, char** argv) {
  std::string all;
  for (int i = 0; i < argc; ++i) {
    if (i) all += ' ';
    all += argv[i];
  }
  return all;
}

int run_cli(int argc, char** argv) {
  CLI::App app{"NPLM kernel goodness-of-fit testing for generative models"};
  app.require_subcommand(1);
  app.fallthrough();

  GlobalOptions g;
  app.add_option("--seed", g.seed, "Master seed override")
      ->each([&](const std::string&) { g.seed_given = true; });
  app.add_option("--threads", g.threads,
                 "Worker threads (0 = hardware concurrency)");
  app.add_option("--format", g.format, "Dataset file format: text|binary")
      ->check(CLI::IsMember({"text", "binary", "auto"}))
      ->each([&](const std::string&) { g.format_given = true; });
  app.add_option("--direction", g.direction,
                 "Which input plays the reference role")
      ->check(CLI::IsMember({"true-as-ref", "gen-as-ref"}));

  const std::string command_line = join_args(argc, argv);

  // ---- gen-mog ----
  auto* gen = app.add_subcommand(
      "gen-mog", "Generate a mixture-of-Gaussians benchmark");
  int gen_dim = 4, gen_components = 3;
  std::int64_t gen_n_ref = 20000, gen_n_data = 0, gen_n_pool = 0;
  double gen_epsilon = 0.0;
  std::string gen_out_dir;
  gen->add_option("--dim", gen_dim, "Dimensionality")->check(CLI::PositiveNumber);
  gen->add_option("--components", gen_components, "Mixture components");
  gen->add_option("--n-ref", gen_n_ref, "Reference sample size");
  gen->add_option("--n-data", gen_n_data, "Generated-data sample size");
  gen->add_option("--n-pool", gen_n_pool, "Extra toy-pool sample size");
  gen->add_option("--epsilon", gen_epsilon,
                  "Perturbation strength for the imperfect-generator surrogate");
  gen->add_option("--out-dir", gen_out_dir, "Output directory")->required();

  // ---- select-hyper ----
  auto* hyper = app.add_subcommand(
      "select-hyper", "Pick kernel width, centers and regularization");
  std::string hy_reference, hy_pool, hy_out, hy_preset, hy_scan_out;
  std::int64_t hy_toy_size = 0;
  double hy_sigma_percentile = 90.0;
  std::int64_t hy_sigma_subsample = 5000;
  int hy_n_centers = 0;
  std::string hy_m_grid, hy_lambda_grid = "1e-4,1e-6,1e-8,1e-10";
  int hy_m_toys = 20, hy_probe_toys = 10;
  double hy_time_budget = 10.0;
  bool hy_no_standardize = false;
  std::string hy_mode = "bootstrap";
  hyper->add_option("--reference", hy_reference, "Reference sample file")
      ->required();
  hyper->add_option("--toy-pool", hy_pool, "Toy pool file (default: reference)");
  hyper->add_option("--toy-size", hy_toy_size, "Toy sample size")->required();
  hyper->add_option("--sigma-percentile", hy_sigma_percentile,
                    "Pairwise-distance percentile for the kernel width");
  hyper->add_option("--sigma-subsample", hy_sigma_subsample,
                    "Subsample cap for the pairwise distances");
  hyper->add_option("--n-centers", hy_n_centers,
                    "Fix the number of centers (skips the M scan)");
  hyper->add_option("--m-grid", hy_m_grid, "Ascending M grid for the scan");
  hyper->add_option("--m-toys", hy_m_toys, "Toys per M grid point");
  hyper->add_option("--lambda-grid", hy_lambda_grid,
                    "Descending lambda grid");
  hyper->add_option("--probe-toys", hy_probe_toys, "Toys per lambda probe");
  hyper->add_option("--time-budget", hy_time_budget,
                    "Per-toy training budget in seconds");
  hyper->add_option("--mode", hy_mode, "Toy resampling mode")
      ->check(CLI::IsMember({"partition", "bootstrap"}));
  hyper->add_option("--preset", hy_preset,
                    "Published benchmark preset (raw coordinates)");
  hyper->add_flag("--no-standardize", hy_no_standardize,
                  "Keep raw coordinates");
  hyper->add_option("--scan-out", hy_scan_out, "Write the scan table here");
  hyper->add_option("--out", hy_out, "Config file to write")->required();

  // ---- calibrate ----
  auto* cal = app.add_subcommand("calibrate",
                                 "Estimate the null distribution with toys");
  std::string cal_reference, cal_pool, cal_config, cal_out;
  int cal_n_toys = 300;
  std::string cal_mode = "bootstrap";
  cal->add_option("--reference", cal_reference, "Reference sample file")
      ->required();
  cal->add_option("--toy-pool", cal_pool, "Toy pool file (default: reference)");
  cal->add_option("--config", cal_config, "Config file")->required();
  cal->add_option("--n-toys", cal_n_toys, "Number of pseudo-experiments");
  cal->add_option("--mode", cal_mode, "Toy resampling mode")
      ->check(CLI::IsMember({"partition", "bootstrap"}));
  cal->add_option("--out", cal_out, "Null model file to write")->required();

  // ---- test ----
  auto* tst = app.add_subcommand("test", "Run a single test and report");
  std::string tst_true, tst_gen, tst_config, tst_null, tst_out, tst_model_out;
  double tst_alpha = -1.0;
  tst->add_option("--true", tst_true, "Sample from the true distribution")
      ->required();
  tst->add_option("--gen", tst_gen, "Sample from the generative model")
      ->required();
  tst->add_option("--config", tst_config, "Config file")->required();
  tst->add_option("--null", tst_null, "Calibrated null model")->required();
  tst->add_option("--alpha", tst_alpha, "Type-I rate for a reject decision");
  tst->add_option("--save-model", tst_model_out, "Write the fitted model here");
  tst->add_option("--out", tst_out, "Report file to write")->required();

  // ---- validate ----
  auto* val = app.add_subcommand(
      "validate", "Repeat the test and summarize the Z-score distribution");
  std::string val_true, val_gen, val_config, val_null, val_out;
  int val_repeats = 40;
  std::string val_mode = "bootstrap";
  val->add_option("--true", val_true, "Sample pool from the true distribution")
      ->required();
  val->add_option("--gen", val_gen, "Sample pool from the generative model")
      ->required();
  val->add_option("--config", val_config, "Config file")->required();
  val->add_option("--null", val_null, "Calibrated null model")->required();
  val->add_option("--n-repeats", val_repeats, "Validation repeats");
  val->add_option("--mode", val_mode, "Repeat resampling mode")
      ->check(CLI::IsMember({"partition", "bootstrap"}));
  val->add_option("--out", val_out, "Summary file to write")->required();

  // ---- diagnose ----
  auto* diag = app.add_subcommand(
      "diagnose", "Per-point scores, anomaly selection and histogram bundles");
  std::string diag_true, diag_gen, diag_config, diag_model, diag_out_dir;
  double diag_quantile = 0.01;
  bool diag_bottom = false;
  int diag_bins = 40, diag_band_toys = 10;
  diag->add_option("--true", diag_true, "Sample from the true distribution")
      ->required();
  diag->add_option("--gen", diag_gen, "Sample from the generative model")
      ->required();
  diag->add_option("--config", diag_config, "Config file")->required();
  diag->add_option("--model", diag_model,
                   "Reuse a fitted model instead of training");
  diag->add_option("--quantile", diag_quantile, "Selection quantile");
  diag->add_flag("--bottom", diag_bottom,
                 "Select the low-score (underdensity) tail");
  diag->add_option("--bins", diag_bins, "Histogram bins per dimension");
  diag->add_option("--band-toys", diag_band_toys,
                   "Null-toy models behind the score band");
  diag->add_option("--out-dir", diag_out_dir, "Output directory")->required();

  // ---- scan ----
  auto* scn = app.add_subcommand("scan", "Median-t scan over (M, lambda)");
  std::string scn_reference, scn_pool, scn_config, scn_out;
  std::string scn_m_grid, scn_lambda_grid;
  int scn_toys = 20;
  std::string scn_mode = "bootstrap";
  scn->add_option("--reference", scn_reference, "Reference sample file")
      ->required();
  scn->add_option("--toy-pool", scn_pool, "Toy pool file (default: reference)");
  scn->add_option("--config", scn_config, "Config file")->required();
  scn->add_option("--m-grid", scn_m_grid, "M values (default: config value)");
  scn->add_option("--lambda-grid", scn_lambda_grid,
                  "Lambda values (default: config value)");
  scn->add_option("--n-toys", scn_toys, "Toys per grid point");
  scn->add_option("--mode", scn_mode, "Toy resampling mode")
      ->check(CLI::IsMember({"partition", "bootstrap"}));
  scn->add_option("--out", scn_out, "Scan table to write")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;  // uniform usage-error code
  }

  const auto start = clock_type::now();
  const int threads = resolve_threads(g.threads);
  const DataFormat out_format = parse_format(g.format == "auto" ? "text" : g.format);
  const std::string ext = out_format == DataFormat::Binary ? ".npb" : ".csv";

  RunManifest manifest;
  manifest.command = command_line;
  manifest.seeds = {g.seed};

  if (*gen) {
    fs::create_directories(gen_out_dir);
    const auto out = [&](const std::string& name) {
      return (fs::path(gen_out_dir) / name).string();
    };
    MoGSpec spec = random_mog(gen_dim, gen_components, g.seed);
    manifest.config = json{{"dim", gen_dim},
                           {"components", gen_components},
                           {"epsilon", gen_epsilon}};

    Dataset reference =
        sample_mog(spec, gen_n_ref, derive_seed(g.seed, Stream::Sample, 1));
    reference.label = "mog reference";
    write_dataset(reference, out("reference" + ext), out_format);
    manifest.outputs.push_back(out("reference" + ext));

    if (gen_n_pool > 0) {
      Dataset pool =
          sample_mog(spec, gen_n_pool, derive_seed(g.seed, Stream::Sample, 2));
      pool.label = "mog toy pool";
      write_dataset(pool, out("toy_pool" + ext), out_format);
      manifest.outputs.push_back(out("toy_pool" + ext));
    }
    if (gen_n_data > 0) {
      const MoGSpec source =
          gen_epsilon > 0.0 ? perturb_mog(spec, gen_epsilon) : spec;
      if (gen_epsilon > 0.0) {
        finish_manifest(manifest, start);
        write_report(source, out("mog_spec_perturbed.json"), &manifest);
        manifest.outputs.push_back(out("mog_spec_perturbed.json"));
      }
      Dataset data =
          sample_mog(source, gen_n_data, derive_seed(g.seed, Stream::Sample, 3));
      data.label = gen_epsilon > 0.0 ? "mog generated (perturbed)"
                                     : "mog generated";
      write_dataset(data, out("data" + ext), out_format);
      manifest.outputs.push_back(out("data" + ext));
    }
    manifest.outputs.push_back(out("mog_spec.json"));
    finish_manifest(manifest, start);
    write_report(spec, out("mog_spec.json"), &manifest);
    std::cout << "wrote benchmark files to " << gen_out_dir << "\n";
    return 0;
  }

  if (*hyper) {
    Dataset reference = load_dataset(hy_reference, g, manifest);
    Dataset pool = hy_pool.empty() ? reference : load_dataset(hy_pool, g, manifest);

    PipelineConfig out_config;
    out_config.nplm.master_seed = g.seed;
    out_config.toy_size = hy_toy_size;

    if (!hy_preset.empty()) {
      const auto preset = find_preset(hy_preset);
      if (!preset) {
        throw std::invalid_argument("unknown preset '" + hy_preset + "'");
      }
      out_config.nplm.n_centers = preset->n_centers;
      out_config.nplm.kernel_width = preset->kernel_width;
      out_config.nplm.regularization = preset->regularization;
      out_config.standardize = preset->standardize;
    } else {
      out_config.standardize = !hy_no_standardize;
      apply_standardization(out_config.standardize, reference, pool);
      out_config.nplm.kernel_width = select_sigma(
          reference, hy_sigma_percentile, hy_sigma_subsample, g.seed);

      const ResamplingPolicy policy{resampling_mode_from_string(hy_mode),
                                    hy_toy_size};
      ScanResult combined;
      NplmConfig base = out_config.nplm;
      const auto lambda_grid = parse_double_grid(hy_lambda_grid);
      base.regularization =
          lambda_grid.empty() ? 1e-6 : lambda_grid.front();

      if (hy_n_centers > 0) {
        base.n_centers = hy_n_centers;
      } else {
        if (hy_m_grid.empty()) {
          throw std::invalid_argument(
              "select-hyper needs --n-centers or --m-grid");
        }
        const ScanResult m_scan = scan_m(reference, pool, base,
                                         parse_int_grid(hy_m_grid), hy_m_toys,
                                         policy, threads);
        base.n_centers = saturation_m(m_scan);
        combined.points.insert(combined.points.end(), m_scan.points.begin(),
                               m_scan.points.end());
      }
      ScanResult lambda_scan;
      base.regularization =
          select_lambda(reference, pool, base, lambda_grid, hy_probe_toys,
                        hy_time_budget, policy, threads, &lambda_scan);
      combined.points.insert(combined.points.end(), lambda_scan.points.begin(),
                             lambda_scan.points.end());
      out_config.nplm = base;
      if (!hy_scan_out.empty()) {
        finish_manifest(manifest, start);
        manifest.outputs.push_back(hy_scan_out);
        write_report(combined, hy_scan_out, &manifest);
      }
    }
    manifest.config = out_config;
    manifest.outputs.push_back(hy_out);
    finish_manifest(manifest, start);
    write_report(out_config, hy_out, &manifest);
    std::cout << "selected M=" << out_config.nplm.n_centers
              << " sigma=" << out_config.nplm.kernel_width
              << " lambda=" << out_config.nplm.regularization << "\n";
    return 0;
  }

  if (*cal) {
    const PipelineConfig config = load_config(cal_config, g, manifest);
    Dataset reference = load_dataset(cal_reference, g, manifest);
    Dataset pool = cal_pool.empty() ? reference
                                    : load_dataset(cal_pool, g, manifest);
    apply_standardization(config.standardize, reference, pool);
    if (config.toy_size <= 0) {
      throw std::invalid_argument("config has no positive toy_size");
    }
    const ResamplingPolicy policy{resampling_mode_from_string(cal_mode),
                                  config.toy_size};
    const NullModel null =
        calibrate_null(reference, pool, config.nplm, policy, cal_n_toys,
                       threads, config.standardize);
    manifest.config = config;
    manifest.outputs.push_back(cal_out);
    finish_manifest(manifest, start);
    json doc = null;
    doc["fingerprint_inputs"] = fingerprint_inputs_json(
        config.nplm, reference.n(), config.toy_size, config.standardize);
    doc["manifest"] = manifest;
    write_json_file(doc, cal_out);
    std::cout << "calibrated " << null.n_toys << " toys (failed "
              << null.n_failed << "), chi2 dof " << null.chi2_dof
              << ", KS p " << null.ks_pvalue << "\n";
    if (null.overlap_warning) {
      std::cerr << "[nplm] warning: partition toys overlap the reference "
                   "sample or each other\n";
    }
    return 0;
  }

  if (*tst) {
    const PipelineConfig config = load_config(tst_config, g, manifest);
    Dataset true_sample = load_dataset(tst_true, g, manifest);
    Dataset gen_sample = load_dataset(tst_gen, g, manifest);
    auto inputs = resolve_direction(std::move(true_sample),
                                    std::move(gen_sample), g.direction);
    apply_standardization(config.standardize, inputs.reference, inputs.data);

    const json null_doc = load_null_doc(tst_null, manifest);
    const NullModel null = null_doc.get<NullModel>();
    require_matching_null(null, null_doc, config.nplm, inputs.reference.n(),
                          inputs.data.n(), config.standardize);
    warn_reference_mismatch(null, inputs.reference);

    const SingleTest result =
        run_single_test(inputs.reference, inputs.data, config.nplm);
    std::optional<double> alpha;
    if (tst_alpha >= 0.0) alpha = tst_alpha;
    TestReport report = make_report(result.t, null, alpha, inputs.direction,
                                    {config.nplm.master_seed});
    manifest.config = config;
    manifest.outputs.push_back(tst_out);
    if (!tst_model_out.empty()) {
      manifest.outputs.push_back(tst_model_out);
    }
    finish_manifest(manifest, start);
    write_report(report, tst_out, &manifest);
    if (!tst_model_out.empty()) {
      write_report(result.model, tst_model_out, &manifest);
    }
    std::cout << "t = " << report.t_obs << ", p_chi2 = " << report.p_chi2
              << ", p_emp = " << report.p_empirical
              << ", Z = " << report.z_score << "\n";
    if (result.exp_clamped > 0) {
      std::cerr << "[nplm] warning: " << result.exp_clamped
                << " exponentials clamped in the statistic\n";
    }
    return 0;
  }

  if (*val) {
    const PipelineConfig config = load_config(val_config, g, manifest);
    Dataset true_sample = load_dataset(val_true, g, manifest);
    Dataset gen_sample = load_dataset(val_gen, g, manifest);
    auto inputs = resolve_direction(std::move(true_sample),
                                    std::move(gen_sample), g.direction);
    apply_standardization(config.standardize, inputs.reference, inputs.data);

    const json null_doc = load_null_doc(val_null, manifest);
    const NullModel null = null_doc.get<NullModel>();
    require_matching_null(null, null_doc, config.nplm, inputs.reference.n(),
                          config.toy_size, config.standardize);
    warn_reference_mismatch(null, inputs.reference);

    const ResamplingPolicy policy{resampling_mode_from_string(val_mode),
                                  config.toy_size};
    const ValidationSummary summary =
        run_validation(inputs.reference, inputs.data, config.nplm, null,
                       val_repeats, policy, inputs.direction, threads,
                       config.standardize);
    manifest.config = config;
    manifest.outputs.push_back(val_out);
    finish_manifest(manifest, start);
    write_report(summary, val_out, &manifest);
    std::cout << "median Z = " << summary.z_median << " (68% band ["
              << summary.ci68_low << ", " << summary.ci68_high << "]) over "
              << summary.n_repeats << " repeats\n";
    return 0;
  }

  if (*diag) {
    const PipelineConfig config = load_config(diag_config, g, manifest);
    Dataset true_sample = load_dataset(diag_true, g, manifest);
    Dataset gen_sample = load_dataset(diag_gen, g, manifest);
    auto inputs = resolve_direction(std::move(true_sample),
                                    std::move(gen_sample), g.direction);
    apply_standardization(config.standardize, inputs.reference, inputs.data);
    fs::create_directories(diag_out_dir);
    const auto out = [&](const std::string& name) {
      return (fs::path(diag_out_dir) / name).string();
    };

    TrainedModel model;
    if (!diag_model.empty()) {
      model = read_report<TrainedModel>(diag_model);
      manifest.inputs.emplace_back(diag_model, file_fingerprint(diag_model));
    } else {
      model = fit(inputs.reference, inputs.data, config.nplm);
      manifest.outputs.push_back(out("model.json"));
    }

    const Eigen::VectorXd data_scores = classifier_scores(model, inputs.data);
    const Eigen::VectorXd ref_scores =
        classifier_scores(model, inputs.reference);
    const Dataset selected = select_top_quantile(inputs.data, data_scores,
                                                 diag_quantile, diag_bottom);
    const Eigen::VectorXd ref_weights =
        reweight_reference(model, inputs.reference);
    const HistogramBundle corner =
        corner_data(inputs.reference, inputs.data, selected, diag_bins);

    // null-toy models behind the score band, resampled from the reference
    std::vector<TrainedModel> band_models(
        static_cast<std::size_t>(diag_band_toys));
    parallel_for(diag_band_toys, threads, [&](std::int64_t i) {
      const std::uint64_t toy_seed = derive_seed(
          config.nplm.master_seed, Stream::Toy, static_cast<std::uint64_t>(i));
      NplmConfig toy_config = config.nplm;
      toy_config.master_seed = toy_seed;
      const Dataset toy =
          resample(inputs.reference, inputs.data.n(), true,
                   derive_seed(toy_seed, Stream::Resample));
      band_models[static_cast<std::size_t>(i)] =
          fit(inputs.reference, toy, toy_config);
    });
    const BandHistogram band =
        score_reference_band(band_models, inputs.reference, diag_bins);

    manifest.config = config;
    const std::string selected_name = "selected" + ext;
    const std::string weights_name = "ref_weights" + ext;
    for (const auto& name : {std::string("score_band.json"),
                             std::string("corner.json"), selected_name,
                             weights_name}) {
      manifest.outputs.push_back(out(name));
    }
    finish_manifest(manifest, start);

    if (diag_model.empty()) write_report(model, out("model.json"), &manifest);
    json band_doc = band;
    band_doc["reference_hist"] = json::array();
    band_doc["data_hist"] = json::array();
    const Eigen::VectorXd ref_hist = histogram_counts(ref_scores, band.edges);
    const Eigen::VectorXd data_hist =
        histogram_counts(data_scores, band.edges);
    for (Eigen::Index b = 0; b < ref_hist.size(); ++b) {
      band_doc["reference_hist"].push_back(ref_hist[b]);
      band_doc["data_hist"].push_back(data_hist[b]);
    }
    band_doc["manifest"] = manifest;
    write_json_file(band_doc, out("score_band.json"));
    write_report(corner, out("corner.json"), &manifest);
    write_dataset(selected, out(selected_name), out_format);
    Dataset weights_col{Eigen::MatrixXd(ref_weights), "reference weights",
                        std::nullopt};
    write_dataset(weights_col, out(weights_name), out_format);
    std::cout << "selected " << selected.n() << " of " << inputs.data.n()
              << " points; outputs in " << diag_out_dir << "\n";
    return 0;
  }

  if (*scn) {
    const PipelineConfig config = load_config(scn_config, g, manifest);
    Dataset reference = load_dataset(scn_reference, g, manifest);
    Dataset pool = scn_pool.empty() ? reference
                                    : load_dataset(scn_pool, g, manifest);
    apply_standardization(config.standardize, reference, pool);
    if (config.toy_size <= 0) {
      throw std::invalid_argument("config has no positive toy_size");
    }
    const auto m_values = scn_m_grid.empty()
                              ? std::vector<int>{config.nplm.n_centers}
                              : parse_int_grid(scn_m_grid);
    const auto lambda_values =
        scn_lambda_grid.empty()
            ? std::vector<double>{config.nplm.regularization}
            : parse_double_grid(scn_lambda_grid);
    std::vector<std::pair<int, double>> grid;
    for (int m : m_values) {
      for (double l : lambda_values) grid.emplace_back(m, l);
    }
    const ResamplingPolicy policy{resampling_mode_from_string(scn_mode),
                                  config.toy_size};
    const ScanResult scan = scan_grid(reference, pool, config.nplm, grid,
                                      scn_toys, policy, threads);
    manifest.config = config;
    manifest.outputs.push_back(scn_out);
    finish_manifest(manifest, start);
    write_report(scan, scn_out, &manifest);
    std::cout << "scanned " << scan.points.size() << " grid points\n";
    return 0;
  }

  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run_cli(argc, argv);
  } catch (const CLI::ParseError&) {
    return 1;  // unreachable: CLI11_PARSE handles these
  } catch (const std::invalid_argument& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return 1;
  } catch (const numeric_error& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return 2;
  } catch (const io_error& e) {
    std::cerr << "i/o failure: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}
