#pragma once

// Result directories, atomic file writes, CSV, PPM, and JSON file helpers.

#include "asymlab/asymmetry.hpp"
#include "asymlab/harness/tensor_io.hpp"

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace asymlab {

/// Writes via a temporary sibling and rename, so readers never see a partial file.
void write_file_atomic(const std::filesystem::path& path, const std::string& content);
std::string read_file(const std::filesystem::path& path);
nlohmann::json read_json_file(const std::filesystem::path& path);

/// FNV-1a 64 over the compact dump (object keys are sorted), as 16 hex digits.
std::string config_hash(const nlohmann::json& config);

/// Formats with enough digits to round-trip a double.
std::string format_double(double v);

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  void add(std::vector<std::string> row);
  std::string str() const;
};

/// Binary PPM (P6); `rgb` is (H*W) x 3 in [0, 1], clamped on write.
std::string encode_ppm(const Mat& rgb, int width, int height);
/// Grayscale heat map of a non-negative field scaled by `vmax` (max when <= 0).
Mat heat_map(const Vec& field, double vmax = 0.0);

class OutputDir {
 public:
  /// Refuses an existing non-empty directory unless `force`.
  OutputDir(std::filesystem::path root, bool force);

  const std::filesystem::path& root() const { return root_; }
  void write_text(const std::string& rel, const std::string& content) const;
  void write_json(const std::string& rel, const nlohmann::json& j) const;
  void write_csv(const std::string& rel, const CsvTable& table) const;
  void write_tensor(const std::string& rel, const Tensor& t) const;
  void write_ppm(const std::string& rel, const Mat& rgb, int width, int height) const;

 private:
  std::filesystem::path root_;
};

struct MetricRow {
  std::string run_id;
  std::string metric;
  double value = 0.0;
  std::size_t excluded_pixels = 0;
};

struct ExperimentResult {
  std::string experiment;
  nlohmann::json config;
  std::uint64_t seed = 0;
  std::vector<CheckReport> checks;
  std::vector<MetricRow> metrics;
  nlohmann::json details = nlohmann::json::object();
  /// Kept out of to_json so results.json is reproducible byte for byte.
  double wall_clock_seconds = 0.0;
  /// False when any expected verdict or pinned expectation was missed.
  bool expectations_met = true;

  nlohmann::json to_json() const;
  CsvTable metrics_csv() const;
  /// One row per check: condition, verdict, margin, probes used and passed.
  CsvTable margins_csv() const;
};

/// results.json, metrics.csv, margins.csv and timing.json (wall clock).
void write_result(const OutputDir& out, const ExperimentResult& r);

}  // namespace asymlab
