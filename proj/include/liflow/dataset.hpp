#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "liflow/cloud_io.hpp"
#include "liflow/config.hpp"
#include "liflow/scenes.hpp"
#include "liflow/train.hpp"

namespace liflow {

/// One manifest row: `case_id <TAB> scene <TAB> scan <TAB> seed`, paths
/// relative to the dataset directory.
struct ManifestRow {
  std::string case_id;
  std::string scene_path;
  std::string scan_path;
  std::uint64_t seed = 0;

  bool operator==(const ManifestRow&) const = default;
};

inline constexpr const char* kManifestName = "manifest.tsv";
inline constexpr const char* kDatasetConfigName = "dataset.cfg";

inline void write_manifest(std::ostream& os, const std::vector<ManifestRow>& rows) {
  for (const auto& r : rows) {
    os << r.case_id << '\t' << r.scene_path << '\t' << r.scan_path << '\t' << r.seed << '\n';
  }
}

inline std::vector<ManifestRow> read_manifest(std::istream& is, const std::string& source) {
  std::vector<ManifestRow> rows;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string> fields;
    std::istringstream ls(line);
    std::string f;
    while (std::getline(ls, f, '\t')) fields.push_back(f);
    if (fields.size() != 4) {
      throw Error(source + ":" + std::to_string(line_no) + ": expected 4 tab-separated fields");
    }
    ManifestRow r{fields[0], fields[1], fields[2], 0};
    r.seed = detail::parse_u64(source + ":" + std::to_string(line_no) + ": seed", fields[3]);
    rows.push_back(std::move(r));
  }
  return rows;
}

inline std::string case_id(std::size_t index) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "case_%05zu", index);
  return buf;
}

/// Generates `config.cases` scene/scan pairs into `config.data_dir`. Case i
/// uses seed derive_seed(data_seed, i), so regenerating is byte-identical.
inline std::vector<ManifestRow> make_dataset(const RunConfig& config) {
  namespace fs = std::filesystem;
  const fs::path dir(config.data_dir);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) {
    throw Error("cannot create dataset directory '" + dir.string() + "'");
  }
  std::vector<ManifestRow> rows;
  rows.reserve(config.cases);
  for (std::size_t i = 0; i < config.cases; ++i) {
    const std::uint64_t seed = derive_seed(config.data_seed, i);
    const SceneCase c = make_case(config.scenes, seed);
    ManifestRow row{case_id(i), case_id(i) + ".scene.ply", case_id(i) + ".scan.ply", seed};
    write_cloud(c.scene, dir / row.scene_path, CloudFormat::kPlyBinary);
    write_cloud(c.scan, dir / row.scan_path, CloudFormat::kPlyBinary);
    rows.push_back(std::move(row));
  }
  {
    std::ofstream cfg(dir / kDatasetConfigName);
    if (!cfg) throw Error("cannot write '" + (dir / kDatasetConfigName).string() + "'");
    write_config(cfg, config);
  }
  std::ofstream manifest(dir / kManifestName);
  if (!manifest) throw Error("cannot write '" + (dir / kManifestName).string() + "'");
  write_manifest(manifest, rows);
  if (!manifest) throw Error("failed writing manifest");
  return rows;
}

inline std::vector<ManifestRow> read_manifest(const std::filesystem::path& dir) {
  const auto path = dir / kManifestName;
  std::ifstream in(path);
  if (!in) throw Error("cannot open '" + path.string() + "'");
  return read_manifest(in, path.string());
}

inline std::vector<TrainingCase> load_dataset(const std::filesystem::path& dir) {
  std::vector<TrainingCase> cases;
  for (const auto& row : read_manifest(dir)) {
    TrainingCase c{read_cloud(dir / row.scene_path), read_cloud(dir / row.scan_path)};
    require(!c.scene.empty(), row.case_id + ": empty scene cloud");
    require(!c.scan.empty(), row.case_id + ": empty scan cloud");
    cases.push_back(std::move(c));
  }
  return cases;
}

}  // namespace liflow
