#include "asymlab/harness/output.hpp"

#include "asymlab/error.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <thread>

namespace asymlab {

namespace fs = std::filesystem;
using nlohmann::json;

void write_file_atomic(const fs::path& path, const std::string& content) {
  static std::atomic<unsigned> counter{0};
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  fs::path tmp = path;
  tmp += ".tmp" + std::to_string(std::hash<std::thread::id>{}(std::this_thread::get_id()) % 100000) +
         "_" + std::to_string(counter++);
  {
    std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
    require(bool(os), ErrorCode::IoError, "cannot open " + tmp.string() + " for writing");
    os.write(content.data(), static_cast<std::streamsize>(content.size()));
    require(bool(os), ErrorCode::IoError, "write failed for " + tmp.string());
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) {
    fs::remove(tmp);
    throw Error(ErrorCode::IoError, "rename to " + path.string() + " failed: " + ec.message());
  }
}

std::string read_file(const fs::path& path) {
  std::ifstream is(path, std::ios::binary);
  require(bool(is), ErrorCode::IoError, "cannot open " + path.string());
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

json read_json_file(const fs::path& path) {
  const std::string text = read_file(path);
  try {
    return json::parse(text);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::ConfigError, path.string() + ": " + e.what());
  }
}

std::string config_hash(const json& config) {
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char c : config.dump()) {
    h ^= c;
    h *= 1099511628211ull;
  }
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << h;
  return os.str();
}

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void CsvTable::add(std::vector<std::string> row) {
  require(row.size() == header.size(), ErrorCode::DimensionMismatch, "csv: row width mismatch");
  rows.push_back(std::move(row));
}

std::string CsvTable::str() const {
  auto quote = [](const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string q = "\"";
    for (char c : s) q += c == '"' ? std::string("\"\"") : std::string(1, c);
    return q + "\"";
  };
  std::ostringstream os;
  auto line = [&](const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) os << (i ? "," : "") << quote(cells[i]);
    os << "\n";
  };
  line(header);
  for (const auto& r : rows) line(r);
  return os.str();
}

std::string encode_ppm(const Mat& rgb, int width, int height) {
  require(rgb.rows() == static_cast<Eigen::Index>(width) * height && rgb.cols() == 3,
          ErrorCode::DimensionMismatch, "ppm: pixel matrix shape");
  std::string out = "P6\n" + std::to_string(width) + " " + std::to_string(height) + "\n255\n";
  for (Eigen::Index l = 0; l < rgb.rows(); ++l)
    for (int c = 0; c < 3; ++c) {
      const double v = std::clamp(rgb(l, c), 0.0, 1.0);
      out.push_back(static_cast<char>(static_cast<unsigned char>(std::lround(v * 255.0))));
    }
  return out;
}

Mat heat_map(const Vec& field, double vmax) {
  const double top = vmax > 0.0 ? vmax : (field.size() ? field.maxCoeff() : 0.0);
  Mat rgb(field.size(), 3);
  for (Eigen::Index l = 0; l < field.size(); ++l)
    rgb.row(l).setConstant(top > 0.0 ? std::clamp(field(l) / top, 0.0, 1.0) : 0.0);
  return rgb;
}

OutputDir::OutputDir(fs::path root, bool force) : root_(std::move(root)) {
  if (fs::exists(root_)) {
    require(fs::is_directory(root_), ErrorCode::IoError, root_.string() + " is not a directory");
    require(force || fs::is_empty(root_), ErrorCode::IoError,
            root_.string() + " exists and is not empty; pass --force to overwrite");
  }
  fs::create_directories(root_);
}

void OutputDir::write_text(const std::string& rel, const std::string& content) const {
  write_file_atomic(root_ / rel, content);
}

void OutputDir::write_json(const std::string& rel, const json& j) const {
  write_text(rel, j.dump(2) + "\n");
}

void OutputDir::write_csv(const std::string& rel, const CsvTable& table) const {
  write_text(rel, table.str());
}

void OutputDir::write_tensor(const std::string& rel, const Tensor& t) const {
  asymlab::write_tensor(root_ / rel, t);
}

void OutputDir::write_ppm(const std::string& rel, const Mat& rgb, int width, int height) const {
  write_text(rel, encode_ppm(rgb, width, height));
}

json ExperimentResult::to_json() const {
  json checks_j = json::array();
  for (const auto& c : checks) checks_j.push_back(asymlab::to_json(c));
  json metrics_j = json::array();
  for (const auto& m : metrics)
    metrics_j.push_back({{"run_id", m.run_id},
                         {"metric", m.metric},
                         {"value", m.value},
                         {"excluded_pixels", m.excluded_pixels}});
  return {{"experiment", experiment},
          {"config", config},
          {"config_hash", config_hash(config)},
          {"seed", seed},
          {"checks", checks_j},
          {"metrics", metrics_j},
          {"details", details},
          {"expectations_met", expectations_met}};
}

CsvTable ExperimentResult::metrics_csv() const {
  CsvTable t{{"run_id", "metric", "value", "excluded_pixels"}, {}};
  for (const auto& m : metrics)
    t.add({m.run_id, m.metric, format_double(m.value), std::to_string(m.excluded_pixels)});
  return t;
}

CsvTable ExperimentResult::margins_csv() const {
  CsvTable t{{"condition", "verdict", "margin", "probes_used", "probes_passed"}, {}};
  for (const auto& c : checks)
    t.add({c.condition, to_string(c.verdict), format_double(c.margin), std::to_string(c.probes_used),
           std::to_string(c.probes_passed)});
  return t;
}

void write_result(const OutputDir& out, const ExperimentResult& r) {
  out.write_json("results.json", r.to_json());
  out.write_csv("metrics.csv", r.metrics_csv());
  out.write_csv("margins.csv", r.margins_csv());
  out.write_json("timing.json", {{"experiment", r.experiment},
                                 {"wall_clock_seconds", r.wall_clock_seconds}});
}

}  // namespace asymlab
