#include "support.hpp"

#include <fstream>
#include <sstream>

using namespace vrc;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  std::ostringstream os;
  os << is.rdbuf();
  return os.str();
}

void spit(const fs::path& p, const std::string& text) {
  std::ofstream os(p, std::ios::binary);
  os << text;
}

const char* kHeader3 =
    "ply\nformat ascii 1.0\nelement vertex 3\nproperty float x\nproperty float y\n"
    "property float z\nend_header\n";

}  // namespace

TEST_SUITE("dataset-io") {

TEST_CASE("PLY round trip stays within 1e-8") {
  const auto dir = test::scratch_dir("ply");
  const Points cloud = test::random_cloud(500, 12);
  write_ply(cloud, dir / "c.ply");
  const Points back = read_ply(dir / "c.ply");
  REQUIRE(back.rows() == 500);
  CHECK((back - cloud).cwiseAbs().maxCoeff() < 1e-8);
  CHECK(slurp(dir / "c.ply").rfind("ply\nformat ascii 1.0\nelement vertex 500\n", 0) == 0);
}

TEST_CASE("PLY with a single point") {
  const auto dir = test::scratch_dir("ply1");
  Points one(1, 3);
  one << 0.25, -0.5, 0.75;
  write_ply(one, dir / "one.ply");
  const Points back = read_ply(dir / "one.ply");
  REQUIRE(back.rows() == 1);
  CHECK(test::bit_equal_points(back, one));
}

TEST_CASE("PLY writing is canonical") {
  const auto dir = test::scratch_dir("ply_bytes");
  const Points cloud = test::random_cloud(20, 4);
  write_ply(cloud, dir / "a.ply");
  write_ply(cloud, dir / "b.ply");
  CHECK(slurp(dir / "a.ply") == slurp(dir / "b.ply"));
  CHECK(file_sha256(dir / "a.ply") == sha256_hex(slurp(dir / "b.ply")));
}

TEST_CASE("PLY with fewer rows than the header is a count mismatch") {
  const auto dir = test::scratch_dir("ply_short");
  spit(dir / "short.ply", std::string(kHeader3) + "0 0 0\n1 1 1\n");
  CHECK_THROWS_WITH_AS(read_ply(dir / "short.ply"), doctest::Contains("count mismatch"), FormatError);
  spit(dir / "long.ply", std::string(kHeader3) + "0 0 0\n1 1 1\n2 2 2\n3 3 3\n");
  CHECK_THROWS_WITH_AS(read_ply(dir / "long.ply"), doctest::Contains("count mismatch"), FormatError);
}

TEST_CASE("PLY header errors") {
  const auto dir = test::scratch_dir("ply_bad");
  spit(dir / "magic.ply", "plx\n");
  CHECK_THROWS_AS(read_ply(dir / "magic.ply"), FormatError);
  spit(dir / "binary.ply", "ply\nformat binary_little_endian 1.0\n");
  CHECK_THROWS_WITH_AS(read_ply(dir / "binary.ply"), doctest::Contains("unsupported format"), FormatError);
  spit(dir / "noend.ply", "ply\nformat ascii 1.0\nelement vertex 1\n");
  CHECK_THROWS_AS(read_ply(dir / "noend.ply"), FormatError);
  spit(dir / "coord.ply", std::string(kHeader3) + "0 0 0\n1 x 1\n2 2 2\n");
  CHECK_THROWS_WITH_AS(read_ply(dir / "coord.ply"), doctest::Contains("vertex 1"), FormatError);
  CHECK_THROWS_AS(read_ply(dir / "absent.ply"), std::runtime_error);
}

TEST_CASE("sha256 of known strings") {
  CHECK(sha256_hex("") == "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
  CHECK(sha256_hex("abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST_CASE("dataset save and reload is a deep round trip") {
  const auto dir = test::scratch_dir("ds_roundtrip");
  const Dataset ds = test::tiny_dataset({ShapeFamily::box, ShapeFamily::chair}, 5,
                                        DatasetMode::mvp, 0.5);
  const Manifest m = save_dataset(ds, dir, "tiny");
  CHECK(m.records.size() == 52);
  const Manifest back = read_manifest(dir / "manifest.json");
  CHECK(back == m);
  CHECK(manifest_hash(back) == manifest_hash(m));

  const LoadedDataset loaded = load_dataset(dir);
  REQUIRE(loaded.pairs.size() == ds.pairs.size());
  for (std::size_t i = 0; i < ds.pairs.size(); ++i) {
    const auto& a = ds.pairs[i];
    const auto& b = loaded.pairs[i];
    CHECK(a.pair_id == b.pair_id);
    CHECK(a.split == b.split);
    CHECK((a.partial - b.partial).cwiseAbs().maxCoeff() < 1e-8);
    for (const auto& [res, gt] : a.complete) {
      CHECK((*gt - *b.complete.at(res)).cwiseAbs().maxCoeff() < 1e-8);
    }
  }
  // Views of one shape share one ground-truth buffer after loading.
  CHECK(loaded.pairs[0].complete.at(64) == loaded.pairs[1].complete.at(64));
}

TEST_CASE("manifest JSON round trip and canonical bytes") {
  const auto dir = test::scratch_dir("manifest_bytes");
  const Dataset ds = test::tiny_dataset({ShapeFamily::sphere}, 2, DatasetMode::mvp40);
  const Manifest m = save_dataset(ds, dir, "m40");
  CHECK(m.mode == DatasetMode::mvp40);
  REQUIRE(m.records[0].missing_ratio.has_value());
  CHECK(*m.records[0].missing_ratio == 0.5);
  CHECK(manifest_from_json(nlohmann::json::parse(to_json(m).dump())) == m);
  write_manifest(m, dir / "copy.json");
  CHECK(slurp(dir / "copy.json") == slurp(dir / "manifest.json"));
  // Key order of the output does not follow the input.
  const nlohmann::ordered_json canonical = to_json(m);
  nlohmann::ordered_json reversed = nlohmann::ordered_json::object();
  std::vector<std::string> keys;
  for (const auto& [k, v] : canonical.items()) keys.push_back(k);
  for (auto k = keys.rbegin(); k != keys.rend(); ++k) reversed[*k] = canonical[*k];
  REQUIRE(reversed.dump() != canonical.dump());
  CHECK(to_json(manifest_from_json(reversed)).dump() == canonical.dump());
}

TEST_CASE("same generation seed gives the same manifest hash") {
  const auto a = test::scratch_dir("hash_a");
  const auto b = test::scratch_dir("hash_b");
  const auto c = test::scratch_dir("hash_c");
  const Manifest ma = save_dataset(test::tiny_dataset({ShapeFamily::lamp}, 8), a, "h");
  const Manifest mb = save_dataset(test::tiny_dataset({ShapeFamily::lamp}, 8), b, "h");
  const Manifest mc = save_dataset(test::tiny_dataset({ShapeFamily::lamp}, 9), c, "h");
  CHECK(manifest_hash(ma) == manifest_hash(mb));
  CHECK(file_sha256(a / "manifest.json") == file_sha256(b / "manifest.json"));
  CHECK(manifest_hash(ma) != manifest_hash(mc));
}

TEST_CASE("a record without a ground-truth path names its pair") {
  const auto dir = test::scratch_dir("manifest_missing");
  const Manifest m = save_dataset(test::tiny_dataset({ShapeFamily::box}), dir, "x");
  nlohmann::json j = nlohmann::json::parse(to_json(m).dump());
  j["records"][3]["gt_paths"].erase("128");
  CHECK_THROWS_WITH_AS(manifest_from_json(j), doctest::Contains("box_0000_v03"), FormatError);
  CHECK_THROWS_WITH_AS(manifest_from_json(j), doctest::Contains("/records/3/gt_paths/128"), FormatError);
}

TEST_CASE("manifest schema errors carry a JSON pointer") {
  const auto dir = test::scratch_dir("manifest_schema");
  const Manifest m = save_dataset(test::tiny_dataset({ShapeFamily::box}), dir, "x");
  const nlohmann::json good = nlohmann::json::parse(to_json(m).dump());

  nlohmann::json j = good;
  j["records"][1]["camera_id"] = "one";
  CHECK_THROWS_WITH_AS(manifest_from_json(j), doctest::Contains("/records/1/camera_id"), FormatError);
  j = good;
  j["extra"] = 1;
  CHECK_THROWS_WITH_AS(manifest_from_json(j), doctest::Contains("/extra"), FormatError);
  j = good;
  j["records"][2]["pair_id"] = j["records"][0]["pair_id"];
  CHECK_THROWS_WITH_AS(manifest_from_json(j), doctest::Contains("duplicate"), FormatError);
  j = good;
  j["records"][4]["split"] = "test";
  CHECK_THROWS_WITH_AS(manifest_from_json(j), doctest::Contains("both splits"), FormatError);
}

TEST_CASE("read_manifest checks that referenced files exist") {
  const auto dir = test::scratch_dir("manifest_files");
  const Manifest m = save_dataset(test::tiny_dataset({ShapeFamily::box}), dir, "x");
  fs::remove(dir / m.records[7].partial_path);
  CHECK_THROWS_WITH_AS(read_manifest(dir / "manifest.json"), doctest::Contains(m.records[7].pair_id.c_str()),
                       FormatError);
}

}  // TEST_SUITE
