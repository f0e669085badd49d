#pragma once

#include "cloudmatch/eval.hpp"
#include "cloudmatch/geometry.hpp"
#include "cloudmatch/metric.hpp"
#include "cloudmatch/registration.hpp"

#include <json.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace cloudmatch::io {

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Shortest decimal text that round-trips a double ("%.17g").
inline std::string format_real(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

/// Registration output with a fixed key order.
inline nlohmann::ordered_json transform_to_json(const IcpResult& r, std::uint64_t seed) {
  nlohmann::ordered_json j;
  j["seed"] = seed;
  j["scale"] = r.transform.scale;
  std::vector<double> rot;
  for (int row = 0; row < 3; ++row) {
    for (int col = 0; col < 3; ++col) rot.push_back(r.transform.rotation()(row, col));
  }
  j["rotation"] = rot;
  j["translation"] = {r.transform.translation().x(), r.transform.translation().y(),
                      r.transform.translation().z()};
  j["final_error"] = r.final_error;
  j["per_iteration_error"] = r.per_iteration_error;
  j["correspondences_used"] = r.correspondences_used;
  return j;
}

inline SimilarityTransform transform_from_json(const nlohmann::json& j) {
  SimilarityTransform t;
  t.scale = j.at("scale").get<double>();
  const auto rot = j.at("rotation").get<std::vector<double>>();
  const auto tr = j.at("translation").get<std::vector<double>>();
  if (rot.size() != 9 || tr.size() != 3) throw IoError("transform: bad rotation/translation size");
  for (int row = 0; row < 3; ++row) {
    for (int col = 0; col < 3; ++col) t.motion.rotation(row, col) = rot[3 * row + col];
  }
  t.motion.translation = Vector3(tr[0], tr[1], tr[2]);
  validate(t);
  if (!is_rotation(t.motion.rotation, 1e-6)) throw IoError("transform: rotation is not orthonormal");
  return t;
}

/// Everything needed to reproduce a run besides the input files.
struct RunConfig {
  IcpParams icp;
  double k = kDefaultOutlierK;
  bool symmetric = false;
  std::uint64_t seed = 0;
  std::string gallery_dir;
  std::string probes_dir;
  std::string truth_path;
  std::string output_dir;
  double sweep_min = 0.0;
  double sweep_max = 0.0;
  std::size_t sweep_count = 0;
};

inline nlohmann::ordered_json to_json(const RunConfig& c) {
  nlohmann::ordered_json j;
  j["sample_size"] = c.icp.sample_size;
  j["iterations"] = c.icp.iterations;
  j["outlier_k"] = c.icp.outlier_k;
  j["min_correspondences"] = c.icp.min_correspondences;
  j["normal_neighborhood"] = c.icp.normal_neighborhood;
  j["early_exit_tolerance"] = c.icp.early_exit_tolerance;
  j["k"] = c.k;
  j["symmetric"] = c.symmetric;
  j["seed"] = c.seed;
  j["gallery"] = c.gallery_dir;
  j["probes"] = c.probes_dir;
  j["truth"] = c.truth_path;
  j["out"] = c.output_dir;
  j["sweep"] = {c.sweep_min, c.sweep_max, c.sweep_count};
  return j;
}

inline RunConfig run_config_from_json(const nlohmann::json& j) {
  RunConfig c;
  c.icp.sample_size = j.value("sample_size", c.icp.sample_size);
  c.icp.iterations = j.value("iterations", c.icp.iterations);
  c.icp.outlier_k = j.value("outlier_k", c.icp.outlier_k);
  c.icp.min_correspondences = j.value("min_correspondences", c.icp.min_correspondences);
  c.icp.normal_neighborhood = j.value("normal_neighborhood", c.icp.normal_neighborhood);
  c.icp.early_exit_tolerance = j.value("early_exit_tolerance", c.icp.early_exit_tolerance);
  c.k = j.value("k", c.k);
  c.symmetric = j.value("symmetric", c.symmetric);
  c.seed = j.value("seed", c.seed);
  c.gallery_dir = j.value("gallery", c.gallery_dir);
  c.probes_dir = j.value("probes", c.probes_dir);
  c.truth_path = j.value("truth", c.truth_path);
  c.output_dir = j.value("out", c.output_dir);
  if (j.contains("sweep")) {
    const auto& s = j.at("sweep");
    if (!s.is_array() || s.size() != 3) throw IoError("config: sweep must be [min, max, count]");
    c.sweep_min = s[0].get<double>();
    c.sweep_max = s[1].get<double>();
    c.sweep_count = s[2].get<std::size_t>();
  }
  return c;
}

inline void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  out << text;
  out.flush();
  if (!out) throw IoError("write failed for '" + path.string() + "'");
}

inline std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "' for reading");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

/// Header `probe_id,identity`, one row per probe in label order.
inline std::string truth_csv(const GroundTruth& truth) {
  std::string s = "probe_id,identity\n";
  for (const auto& [probe, identity] : truth) s += probe + "," + identity + "\n";
  return s;
}

inline GroundTruth parse_truth_csv(const std::string& text, const std::string& source_name) {
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  GroundTruth truth;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line_no == 1) {
      if (line != "probe_id,identity") {
        throw IoError(source_name + ":1: expected header 'probe_id,identity'");
      }
      continue;
    }
    if (line.empty()) continue;
    const auto comma = line.find(',');
    if (comma == std::string::npos || line.find(',', comma + 1) != std::string::npos) {
      throw IoError(source_name + ":" + std::to_string(line_no) + ": expected two fields");
    }
    const std::string probe = line.substr(0, comma), identity = line.substr(comma + 1);
    if (probe.empty() || identity.empty()) {
      throw IoError(source_name + ":" + std::to_string(line_no) + ": empty field");
    }
    if (!truth.emplace(probe, identity).second) {
      throw IoError(source_name + ":" + std::to_string(line_no) + ": duplicate probe " + probe);
    }
  }
  if (line_no == 0) throw IoError(source_name + ": empty truth file");
  return truth;
}

/// `theta,far,frr`
inline std::string roc_csv(const VerificationReport& r) {
  std::string s = "theta,far,frr\n";
  for (std::size_t i = 0; i < r.thresholds.size(); ++i) {
    s += format_real(r.thresholds[i]) + "," + format_real(r.far[i]) + "," +
         format_real(r.frr[i]) + "\n";
  }
  return s;
}

/// `rank,rate`
inline std::string cmc_csv(const CmcCurve& c) {
  std::string s = "rank,rate\n";
  for (std::size_t i = 0; i < c.rank_rates.size(); ++i) {
    s += std::to_string(i + 1) + "," + format_real(c.rank_rates[i]) + "\n";
  }
  return s;
}

inline std::string trimmed_distance_csv_header() {
  return "distance,median,outlier_count,retained_count";
}

inline std::string trimmed_distance_csv_row(const TrimmedDistanceResult& r) {
  return format_real(r.distance) + "," + format_real(r.median) + "," +
         std::to_string(r.outlier_count) + "," + std::to_string(r.retained_count);
}

/// Score matrix as `probe_id,<gallery identities...>`.
inline std::string scores_csv(const ScoreMatrix& m) {
  std::string s = "probe_id";
  for (const auto& g : m.gallery) s += "," + g;
  s += "\n";
  for (std::size_t i = 0; i < m.rows(); ++i) {
    s += m.probes[i];
    for (std::size_t j = 0; j < m.cols(); ++j) s += "," + format_real(m(i, j));
    s += "\n";
  }
  return s;
}

}  // namespace cloudmatch::io
