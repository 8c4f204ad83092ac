#pragma once

#include <json.hpp>
#include <string>
#include <utility>
#include <vector>

#include "nplm/calibration.hpp"
#include "nplm/diagnostics.hpp"
#include "nplm/model_selection.hpp"
#include "nplm/mog.hpp"
#include "nplm/types.hpp"

namespace nplm {

using json = nlohmann::json;

enum class DataFormat { Auto, DelimitedText, Binary };

DataFormat sniff_format(const std::string& path);

// DelimitedText: comma- or whitespace-separated rows, '#'-prefixed header
// lines ("# label: ...", "# seed: ...") preserved across round trips.
// Binary: magic "NPLM1", little-endian u32 n_points, u32 dim, then
// n_points*dim little-endian doubles, row-major.
Dataset read_dataset(const std::string& path,
                     DataFormat format = DataFormat::Auto);
void write_dataset(const Dataset& d, const std::string& path,
                   DataFormat format = DataFormat::DelimitedText);

// Records what produced a set of outputs; embedded in every JSON report.
struct RunManifest {
  std::string command;
  json config;
  std::vector<std::pair<std::string, std::string>> inputs;  // path, fingerprint
  std::vector<std::string> outputs;
  std::vector<std::uint64_t> seeds;
  std::string version = std::string(kVersion);
  double wall_time_seconds = 0.0;
};

// Pipeline-level configuration persisted by select-hyper and consumed by the
// other subcommands. The standardization flag and toy size take part in the
// null-model fingerprint.
struct PipelineConfig {
  NplmConfig nplm;
  bool standardize = true;
  std::int64_t toy_size = 0;
};

void to_json(json& j, const NplmConfig& c);
void from_json(const json& j, NplmConfig& c);
void to_json(json& j, const PipelineConfig& c);
void from_json(const json& j, PipelineConfig& c);
void to_json(json& j, const RunManifest& m);
void from_json(const json& j, RunManifest& m);
void to_json(json& j, const TestReport& r);
void from_json(const json& j, TestReport& r);
void to_json(json& j, const ValidationSummary& s);
void from_json(const json& j, ValidationSummary& s);
void to_json(json& j, const NullModel& n);
void from_json(const json& j, NullModel& n);
void to_json(json& j, const ScanResult& s);
void from_json(const json& j, ScanResult& s);
void to_json(json& j, const MoGSpec& s);
void from_json(const json& j, MoGSpec& s);
void to_json(json& j, const TrainedModel& m);
void from_json(const json& j, TrainedModel& m);
void to_json(json& j, const HistogramBundle& b);
void from_json(const json& j, HistogramBundle& b);
void to_json(json& j, const BandHistogram& b);
void from_json(const json& j, BandHistogram& b);

// Writes a JSON document; rejects non-finite numbers so every emitted value
// round-trips exactly.
void write_json_file(const json& doc, const std::string& path);
json read_json_file(const std::string& path);

template <typename T>
void write_report(const T& value, const std::string& path,
                  const RunManifest* manifest = nullptr) {
  json doc = value;
  if (manifest) doc["manifest"] = *manifest;
  write_json_file(doc, path);
}

template <typename T>
T read_report(const std::string& path) {
  return read_json_file(path).get<T>();
}

}  // namespace nplm
