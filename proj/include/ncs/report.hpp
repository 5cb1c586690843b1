#pragma once

#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "ncs/matrix.hpp"

// Artifact files: each command writes its own <section>.json into the output
// directory, then report.json is rebuilt as the inputs echo plus every
// section currently present. Everything that lands in these files is a pure
// function of the inputs (no timestamps, no hostnames), so identical runs
// produce byte-identical reports.

namespace ncs {

namespace fs = std::filesystem;

inline nlohmann::ordered_json mat_to_json(const Mat& m) {
  nlohmann::ordered_json rows = nlohmann::ordered_json::array();
  for (std::size_t i = 0; i < m.rows(); ++i) {
    nlohmann::ordered_json row = nlohmann::ordered_json::array();
    for (std::size_t j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

inline void write_text_file(const fs::path& path, const std::string& content) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot write file: " + path.string());
  out << content;
}

inline void write_json_artifact(const fs::path& dir, const std::string& name,
                                const nlohmann::ordered_json& j) {
  write_text_file(dir / (name + ".json"), j.dump(2) + "\n");
}

// Section order in report.json; merging is stable across reruns.
inline const std::vector<std::string>& report_sections() {
  static const std::vector<std::string> names = {
      "lyapunov", "increment_gains", "assumptions", "analysis",
      "bound",    "sdpa",            "simulation"};
  return names;
}

// Rebuild report.json from the artifacts present; returns how many were found.
inline std::size_t write_report(const fs::path& dir, const nlohmann::ordered_json& inputs) {
  nlohmann::ordered_json report;
  report["inputs"] = inputs;
  std::size_t found = 0;
  for (const auto& name : report_sections()) {
    const fs::path p = dir / (name + ".json");
    if (!fs::exists(p)) continue;
    std::ifstream in(p);
    nlohmann::ordered_json j;
    try {
      j = nlohmann::ordered_json::parse(in);
    } catch (const nlohmann::json::exception&) {
      throw InputError("artifact is not valid JSON: " + p.string());
    }
    report[name] = std::move(j);
    ++found;
  }
  write_text_file(dir / "report.json", report.dump(2) + "\n");
  return found;
}

}  // namespace ncs
