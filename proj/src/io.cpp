#include "vrc/io.hpp"

#include <openssl/evp.h>

#include <charconv>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

namespace vrc {

namespace fs = std::filesystem;

void write_ply(const Points& cloud, const fs::path& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("write_ply: cannot open " + path.string());
  os << "ply\nformat ascii 1.0\nelement vertex " << cloud.rows()
     << "\nproperty float x\nproperty float y\nproperty float z\nend_header\n";
  char buf[96];
  for (Index i = 0; i < cloud.rows(); ++i) {
    std::snprintf(buf, sizeof buf, "%.9g %.9g %.9g\n", cloud(i, 0), cloud(i, 1), cloud(i, 2));
    os << buf;
  }
  if (!os) throw std::runtime_error("write_ply: write failed for " + path.string());
}

Points read_ply(const fs::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("read_ply: cannot open " + path.string());
  const std::string where = "read_ply: " + path.string() + ": ";
  std::string line;
  auto next = [&](const char* what) {
    if (!std::getline(is, line)) throw FormatError(where + "missing " + what);
    if (!line.empty() && line.back() == '\r') line.pop_back();
  };
  next("magic");
  if (line != "ply") throw FormatError(where + "not a PLY file");
  next("format");
  if (line != "format ascii 1.0") throw FormatError(where + "unsupported format '" + line + "'");
  Index n = -1;
  std::vector<std::string> props;
  for (;;) {
    next("end_header");
    if (line == "end_header") break;
    std::istringstream ls(line);
    std::string word;
    ls >> word;
    if (word == "comment" || word.empty()) continue;
    if (word == "element") {
      std::string kind;
      ls >> kind >> n;
      if (kind != "vertex" || !ls || n < 0) throw FormatError(where + "bad element line '" + line + "'");
    } else if (word == "property") {
      std::string type, name;
      ls >> type >> name;
      if (type != "float" && type != "double") {
        throw FormatError(where + "unsupported property type '" + type + "'");
      }
      props.push_back(name);
    } else {
      throw FormatError(where + "unexpected header line '" + line + "'");
    }
  }
  if (n < 0) throw FormatError(where + "no vertex element");
  if (props != std::vector<std::string>{"x", "y", "z"}) {
    throw FormatError(where + "expected properties x y z");
  }
  Points out(n, 3);
  for (Index i = 0; i < n; ++i) {
    if (!std::getline(is, line)) {
      throw FormatError(where + "count mismatch: header says " + std::to_string(n) +
                        " vertices, body has " + std::to_string(i));
    }
    const char* p = line.data();
    const char* end = p + line.size();
    for (int c = 0; c < 3; ++c) {
      while (p < end && (*p == ' ' || *p == '\t')) ++p;
      auto [q, ec] = std::from_chars(p, end, out(i, c));
      if (ec != std::errc()) {
        throw FormatError(where + "bad coordinate on vertex " + std::to_string(i));
      }
      p = q;
    }
  }
  while (std::getline(is, line)) {
    if (line.find_first_not_of(" \t\r") != std::string::npos) {
      throw FormatError(where + "count mismatch: more than " + std::to_string(n) + " vertices");
    }
  }
  return out;
}

std::string sha256_hex(std::string_view bytes) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
    throw std::runtime_error("sha256: digest failed");
  }
  static const char* hex = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out += hex[digest[i] >> 4];
    out += hex[digest[i] & 15];
  }
  return out;
}

std::string file_sha256(const fs::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("file_sha256: cannot open " + path.string());
  std::ostringstream ss;
  ss << is.rdbuf();
  return sha256_hex(ss.str());
}

nlohmann::ordered_json to_json(const Manifest& m) {
  nlohmann::ordered_json j;
  j["name"] = m.name;
  j["mode"] = to_string(m.mode);
  j["seed"] = m.seed;
  j["divisor"] = m.divisor;
  j["partial_resolution"] = m.partial_resolution;
  j["resolutions"] = m.resolutions;
  nlohmann::ordered_json recs = nlohmann::ordered_json::array();
  for (const auto& r : m.records) {
    nlohmann::ordered_json jr;
    jr["pair_id"] = r.pair_id;
    jr["shape_id"] = r.shape_id;
    jr["category"] = r.category;
    jr["camera_id"] = r.camera_id;
    jr["split"] = to_string(r.split);
    if (r.missing_ratio) jr["missing_ratio"] = *r.missing_ratio;
    jr["partial_path"] = r.partial_path;
    jr["partial_sha256"] = r.partial_sha256;
    nlohmann::ordered_json gp = nlohmann::ordered_json::object(), gh = nlohmann::ordered_json::object();
    for (const auto& [res, p] : r.gt_paths) gp[std::to_string(res)] = p;
    for (const auto& [res, h] : r.gt_sha256) gh[std::to_string(res)] = h;
    jr["gt_paths"] = std::move(gp);
    jr["gt_sha256"] = std::move(gh);
    recs.push_back(std::move(jr));
  }
  j["records"] = std::move(recs);
  return j;
}

namespace {

struct Reader {
  const nlohmann::json& root;

  [[noreturn]] void fail(const std::string& ptr, const std::string& msg) const {
    throw FormatError("manifest " + (ptr.empty() ? std::string("/") : ptr) + ": " + msg);
  }

  const nlohmann::json& field(const nlohmann::json& obj, const std::string& ptr,
                              const std::string& key) const {
    if (!obj.is_object()) fail(ptr, "expected an object");
    auto it = obj.find(key);
    if (it == obj.end()) fail(ptr + "/" + key, "missing");
    return *it;
  }
  std::string str(const nlohmann::json& obj, const std::string& ptr, const std::string& key) const {
    const auto& v = field(obj, ptr, key);
    if (!v.is_string()) fail(ptr + "/" + key, "expected a string");
    return v.get<std::string>();
  }
  std::int64_t integer(const nlohmann::json& obj, const std::string& ptr, const std::string& key) const {
    const auto& v = field(obj, ptr, key);
    if (!v.is_number_integer()) fail(ptr + "/" + key, "expected an integer");
    return v.get<std::int64_t>();
  }
  std::map<Index, std::string> string_map(const nlohmann::json& obj, const std::string& ptr,
                                          const std::string& key) const {
    const auto& v = field(obj, ptr, key);
    if (!v.is_object()) fail(ptr + "/" + key, "expected an object");
    std::map<Index, std::string> out;
    for (const auto& [k, s] : v.items()) {
      Index res = 0;
      auto [p, ec] = std::from_chars(k.data(), k.data() + k.size(), res);
      if (ec != std::errc() || p != k.data() + k.size() || res <= 0) {
        fail(ptr + "/" + key + "/" + k, "key is not a resolution");
      }
      if (!s.is_string()) fail(ptr + "/" + key + "/" + k, "expected a string");
      out[res] = s.get<std::string>();
    }
    return out;
  }
};

void check_keys(const Reader& rd, const nlohmann::json& obj, const std::string& ptr,
                std::initializer_list<const char*> allowed) {
  for (const auto& [k, v] : obj.items()) {
    bool ok = false;
    for (const char* a : allowed) ok = ok || k == a;
    if (!ok) rd.fail(ptr + "/" + k, "unknown key");
  }
}

}  // namespace

Manifest manifest_from_json(const nlohmann::json& j) {
  const Reader rd{j};
  if (!j.is_object()) rd.fail("", "expected an object");
  check_keys(rd, j, "", {"name", "mode", "seed", "divisor", "partial_resolution", "resolutions", "records"});
  Manifest m;
  m.name = rd.str(j, "", "name");
  try {
    m.mode = dataset_mode_from_string(rd.str(j, "", "mode"));
  } catch (const std::invalid_argument& e) {
    rd.fail("/mode", e.what());
  }
  const auto& seed = rd.field(j, "", "seed");
  if (!seed.is_number_unsigned() && !(seed.is_number_integer() && seed.get<std::int64_t>() >= 0)) {
    rd.fail("/seed", "expected a non-negative integer");
  }
  m.seed = seed.get<std::uint64_t>();
  m.divisor = static_cast<int>(rd.integer(j, "", "divisor"));
  if (m.divisor < 1) rd.fail("/divisor", "must be >= 1");
  m.partial_resolution = rd.integer(j, "", "partial_resolution");
  const auto& res = rd.field(j, "", "resolutions");
  if (!res.is_array()) rd.fail("/resolutions", "expected an array");
  for (std::size_t i = 0; i < res.size(); ++i) {
    if (!res[i].is_number_integer() || res[i].get<Index>() <= 0) {
      rd.fail("/resolutions/" + std::to_string(i), "expected a positive integer");
    }
    m.resolutions.push_back(res[i].get<Index>());
  }
  const auto& recs = rd.field(j, "", "records");
  if (!recs.is_array()) rd.fail("/records", "expected an array");
  for (std::size_t i = 0; i < recs.size(); ++i) {
    const std::string ptr = "/records/" + std::to_string(i);
    const auto& jr = recs[i];
    if (!jr.is_object()) rd.fail(ptr, "expected an object");
    check_keys(rd, jr, ptr, {"pair_id", "shape_id", "category", "camera_id", "split", "missing_ratio",
                             "partial_path", "partial_sha256", "gt_paths", "gt_sha256"});
    ManifestRecord r;
    r.pair_id = rd.str(jr, ptr, "pair_id");
    const std::string who = " (pair " + r.pair_id + ")";
    auto need = [&](auto&& get) {
      try {
        return get();
      } catch (const FormatError& e) {
        throw FormatError(e.what() + who);
      }
    };
    r.shape_id = need([&] { return rd.str(jr, ptr, "shape_id"); });
    r.category = need([&] { return rd.str(jr, ptr, "category"); });
    r.camera_id = need([&] { return static_cast<int>(rd.integer(jr, ptr, "camera_id")); });
    const std::string split = need([&] { return rd.str(jr, ptr, "split"); });
    if (split == "train") r.split = Split::train;
    else if (split == "test") r.split = Split::test;
    else rd.fail(ptr + "/split", "expected train or test" + who);
    if (jr.contains("missing_ratio")) {
      if (!jr["missing_ratio"].is_number()) rd.fail(ptr + "/missing_ratio", "expected a number" + who);
      r.missing_ratio = jr["missing_ratio"].get<double>();
    }
    r.partial_path = need([&] { return rd.str(jr, ptr, "partial_path"); });
    r.partial_sha256 = need([&] { return rd.str(jr, ptr, "partial_sha256"); });
    r.gt_paths = need([&] { return rd.string_map(jr, ptr, "gt_paths"); });
    r.gt_sha256 = need([&] { return rd.string_map(jr, ptr, "gt_sha256"); });
    for (Index want : m.resolutions) {
      if (!r.gt_paths.count(want)) {
        rd.fail(ptr + "/gt_paths/" + std::to_string(want), "missing ground truth path" + who);
      }
      if (!r.gt_sha256.count(want)) {
        rd.fail(ptr + "/gt_sha256/" + std::to_string(want), "missing ground truth hash" + who);
      }
    }
    m.records.push_back(std::move(r));
  }

  std::set<std::string> ids;
  std::map<std::string, Split> shape_split;
  for (std::size_t i = 0; i < m.records.size(); ++i) {
    const auto& r = m.records[i];
    const std::string ptr = "/records/" + std::to_string(i);
    if (!ids.insert(r.pair_id).second) rd.fail(ptr + "/pair_id", "duplicate pair id " + r.pair_id);
    auto [it, fresh] = shape_split.emplace(r.shape_id, r.split);
    if (!fresh && it->second != r.split) {
      rd.fail(ptr + "/split", "shape " + r.shape_id + " appears in both splits");
    }
  }
  return m;
}

std::string manifest_hash(const Manifest& m) { return sha256_hex(to_json(m).dump()); }

void write_manifest(const Manifest& m, const fs::path& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("write_manifest: cannot open " + path.string());
  os << to_json(m).dump(2) << "\n";
  if (!os) throw std::runtime_error("write_manifest: write failed for " + path.string());
}

Manifest read_manifest(const fs::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("read_manifest: cannot open " + path.string());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(is);
  } catch (const nlohmann::json::parse_error& e) {
    throw FormatError("read_manifest: " + path.string() + ": " + e.what());
  }
  Manifest m = manifest_from_json(j);
  const fs::path base = path.parent_path();
  for (const auto& r : m.records) {
    std::vector<std::string> files{r.partial_path};
    for (const auto& [res, p] : r.gt_paths) files.push_back(p);
    for (const auto& f : files) {
      if (!fs::exists(base / f)) {
        throw FormatError("read_manifest: pair " + r.pair_id + " references missing file " +
                          (base / f).string());
      }
    }
  }
  return m;
}

Manifest save_dataset(const Dataset& ds, const fs::path& dir, const std::string& name) {
  fs::create_directories(dir / "partial");
  fs::create_directories(dir / "complete");
  Manifest m;
  m.name = name;
  m.mode = ds.options.mode;
  m.seed = ds.seed;
  m.divisor = ds.options.divisor;
  m.partial_resolution = ds.options.partial_resolution();
  m.resolutions = ds.options.resolutions();

  std::map<std::string, std::map<Index, std::string>> gt_hash;
  for (const auto& shape : ds.shapes) {
    for (const auto& [res, pts] : shape.complete) {
      const std::string rel = "complete/" + shape.shape_id + "_" + std::to_string(res) + ".ply";
      write_ply(*pts, dir / rel);
      gt_hash[shape.shape_id][res] = file_sha256(dir / rel);
    }
  }
  for (const auto& p : ds.pairs) {
    ManifestRecord r;
    r.pair_id = p.pair_id;
    r.shape_id = p.shape_id;
    r.category = p.category;
    r.camera_id = p.camera_id;
    r.split = p.split;
    r.missing_ratio = p.missing_ratio;
    r.partial_path = "partial/" + p.pair_id + ".ply";
    write_ply(p.partial, dir / r.partial_path);
    r.partial_sha256 = file_sha256(dir / r.partial_path);
    for (const auto& [res, pts] : p.complete) {
      r.gt_paths[res] = "complete/" + p.shape_id + "_" + std::to_string(res) + ".ply";
      r.gt_sha256[res] = gt_hash.at(p.shape_id).at(res);
    }
    m.records.push_back(std::move(r));
  }
  write_manifest(m, dir / "manifest.json");
  return m;
}

LoadedDataset load_dataset(const fs::path& dir) {
  const fs::path manifest = fs::is_directory(dir) ? dir / "manifest.json" : dir;
  const fs::path base = manifest.parent_path();
  LoadedDataset out;
  out.manifest = read_manifest(manifest);
  std::map<std::string, std::shared_ptr<const Points>> cache;
  for (const auto& r : out.manifest.records) {
    DatasetPair p;
    p.pair_id = r.pair_id;
    p.shape_id = r.shape_id;
    p.category = r.category;
    p.camera_id = r.camera_id;
    p.split = r.split;
    p.missing_ratio = r.missing_ratio;
    p.partial = read_ply(base / r.partial_path);
    for (const auto& [res, rel] : r.gt_paths) {
      auto& slot = cache[rel];
      if (!slot) slot = std::make_shared<const Points>(read_ply(base / rel));
      p.complete[res] = slot;
    }
    out.pairs.push_back(std::move(p));
  }
  return out;
}

}  // namespace vrc
