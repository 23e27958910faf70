#pragma once

#include "vrc/view_synthesis.hpp"

#include <json.hpp>

#include <filesystem>
#include <optional>
#include <string>

namespace vrc {

using Index = Eigen::Index;

struct FormatError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// ASCII PLY, "x y z" per vertex with 9 significant digits.
void write_ply(const Points& cloud, const std::filesystem::path& path);
Points read_ply(const std::filesystem::path& path);

std::string sha256_hex(std::string_view bytes);
std::string file_sha256(const std::filesystem::path& path);

struct ManifestRecord {
  std::string pair_id;
  std::string shape_id;
  std::string category;
  int camera_id = 0;
  Split split = Split::train;
  std::optional<double> missing_ratio;
  std::string partial_path;  // relative to the manifest directory
  std::string partial_sha256;
  std::map<Index, std::string> gt_paths;
  std::map<Index, std::string> gt_sha256;

  bool operator==(const ManifestRecord&) const = default;
};

struct Manifest {
  std::string name;
  DatasetMode mode = DatasetMode::mvp;
  std::uint64_t seed = 0;
  int divisor = 4;
  Index partial_resolution = 0;
  std::vector<Index> resolutions;
  std::vector<ManifestRecord> records;

  bool operator==(const Manifest&) const = default;
};

/// Key order is fixed, so equal manifests serialize to equal bytes.
nlohmann::ordered_json to_json(const Manifest& m);
/// Schema check; errors carry the JSON pointer of the offending value.
Manifest manifest_from_json(const nlohmann::json& j);
/// SHA-256 of the canonical serialization.
std::string manifest_hash(const Manifest& m);

void write_manifest(const Manifest& m, const std::filesystem::path& path);
/// Parses, validates the schema and the record invariants, and checks that
/// every referenced file exists next to the manifest.
Manifest read_manifest(const std::filesystem::path& path);

/// Writes partial/<pair_id>.ply, complete/<shape_id>_<res>.ply and
/// manifest.json under `dir`.
Manifest save_dataset(const Dataset& ds, const std::filesystem::path& dir, const std::string& name);

struct LoadedDataset {
  Manifest manifest;
  std::vector<DatasetPair> pairs;
};
/// `dir` may be the dataset directory or its manifest.json.
LoadedDataset load_dataset(const std::filesystem::path& dir);

}  // namespace vrc
