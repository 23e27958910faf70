#include "support.hpp"

#include <set>

using namespace vrc;

namespace {

std::vector<double> pairwise_angles(const Eigen::Matrix<double, 26, 3, Eigen::RowMajor>& d) {
  std::vector<double> a;
  for (int i = 0; i < 26; ++i)
    for (int j = i + 1; j < 26; ++j)
      a.push_back(std::acos(std::clamp(d.row(i).dot(d.row(j)), -1.0, 1.0)));
  std::sort(a.begin(), a.end());
  return a;
}

Points unit_sphere(Index n, std::uint64_t seed) {
  return synth_shape(ShapeSpec{ShapeFamily::sphere, {1.0}, {}}, n, seed).points;
}

}  // namespace

TEST_SUITE("view-synthesis") {

TEST_CASE("26 unit camera directions") {
  for (std::uint64_t seed : {0ULL, 1ULL, 99ULL}) {
    const CameraPoseSet cams = camera_poses_26(seed);
    for (int i = 0; i < 26; ++i) CHECK(std::abs(cams.directions.row(i).norm() - 1.0) < 1e-12);
    CHECK(cams.radius == 2.0);
    CHECK((cams.position(3).norm() - 2.0) < 1e-12);
  }
}

TEST_CASE("minimum pairwise camera angle is 35.26 degrees") {
  // (1,1,0)/sqrt2 against (1,1,1)/sqrt3
  const double want = std::acos(std::sqrt(2.0 / 3.0));
  for (std::uint64_t seed : {3ULL, 4ULL}) {
    const auto angles = pairwise_angles(camera_poses_26(seed).directions);
    CHECK(angles.front() == doctest::Approx(want).epsilon(1e-9));
    CHECK(angles.front() * 180.0 / M_PI == doctest::Approx(35.26).epsilon(1e-3));
  }
}

TEST_CASE("seeds differ by one global rotation") {
  const CameraPoseSet a = camera_poses_26(5), b = camera_poses_26(6);
  CHECK_FALSE(a.directions.isApprox(b.directions));
  const Eigen::MatrixXd ga = a.directions * a.directions.transpose();
  const Eigen::MatrixXd gb = b.directions * b.directions.transpose();
  CHECK((ga - gb).cwiseAbs().maxCoeff() < 1e-12);
  // pairwise-angle multiset, compared through the cosines
  auto cosines = [](const auto& d) {
    std::vector<double> c;
    for (int i = 0; i < 26; ++i)
      for (int j = i + 1; j < 26; ++j) c.push_back(d.row(i).dot(d.row(j)));
    std::sort(c.begin(), c.end());
    return c;
  };
  const auto base = cosines(base_camera_directions());
  const auto rot = cosines(a.directions);
  for (std::size_t i = 0; i < base.size(); ++i) CHECK(std::abs(base[i] - rot[i]) < 1e-12);
  CHECK(std::abs(a.global_rotation.determinant() - 1.0) < 1e-12);
}

// A distant camera sees a hemisphere; at radius 2 the visible cap is the
// quarter of the sphere with cos(angle) > 1/2.
TEST_CASE("render_partial sees about a hemisphere of a sphere") {
  const Points dense = unit_sphere(8192, 1);
  const CameraPoseSet far = camera_poses_26(2, 50.0);
  const CameraPoseSet near = camera_poses_26(2);
  for (int c : {0, 7, 13}) {
    const double frac = static_cast<double>(hidden_point_removal(dense, far.position(c)).size()) / 8192.0;
    CHECK(frac >= 0.35);
    CHECK(frac <= 0.65);
    const double cap = static_cast<double>(hidden_point_removal(dense, near.position(c)).size()) / 8192.0;
    CHECK(cap == doctest::Approx(0.25).epsilon(0.1));
  }
}

TEST_CASE("antipodal views cover the sphere") {
  const Points dense = unit_sphere(8192, 3);
  const Eigen::Vector3d cam = 50.0 * Eigen::Vector3d(0.3, 1.7, -0.9).normalized();
  std::set<Index> both;
  for (Index i : hidden_point_removal(dense, cam)) both.insert(i);
  for (Index i : hidden_point_removal(dense, -cam)) both.insert(i);
  CHECK(static_cast<double>(both.size()) >= 0.95 * 8192);
}

TEST_CASE("render_partial output is an exact-size subset") {
  const Points dense = synth_shape(default_shape(ShapeFamily::chair), 4096, 4).points;
  const Points norm = normalize_unit_sphere(dense).points;
  const CameraPoseSet cams = camera_poses_26(5);
  const PartialView v = render_partial(norm, cams.position(2), 512);
  CHECK(v.points.rows() == 512);
  CHECK(v.candidate_count >= 512);
  for (Index i = 0; i < 512; ++i) CHECK(v.points.row(i) == norm.row(v.source_indices[i]));
  try {
    (void)render_partial(norm, cams.position(2), 4000);
    FAIL("expected UnderVisibilityError");
  } catch (const UnderVisibilityError& e) {
    CHECK(std::string(e.what()).find("4000") != std::string::npos);
  }
}

TEST_CASE("crop keeps the camera-nearest points") {
  const Points gt = unit_sphere(16384, 6);
  const Eigen::Vector3d cam(2, 0, 0);
  const PartialView half = crop_missing_ratio(gt, cam, 0.5, 2048);
  CHECK(half.candidate_count == 8192);
  CHECK(half.points.rows() == 2048);

  const Points small = unit_sphere(1024, 7);
  for (double r : {0.25, 0.5, 0.3}) {
    const Index n = small.rows();
    const Index keep = n - static_cast<Index>(std::floor(r * static_cast<double>(n)));
    const PartialView v = crop_missing_ratio(small, cam, r, keep);
    CHECK(v.candidate_count == keep);
    // oracle: sort by distance to the camera, ties keep the smaller index
    std::vector<Index> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), Index{0});
    std::stable_sort(order.begin(), order.end(), [&](Index a, Index b) {
      return (small.row(a).transpose() - cam).norm() < (small.row(b).transpose() - cam).norm();
    });
    std::set<Index> want(order.begin(), order.begin() + keep);
    std::set<Index> got(v.source_indices.begin(), v.source_indices.end());
    CHECK(got == want);
  }
}

TEST_CASE("tiny missing ratio is FPS of the whole cloud") {
  const Points gt = unit_sphere(1024, 8);
  const Eigen::Vector3d cam(0, 2, 0);
  const PartialView v = crop_missing_ratio(gt, cam, 1e-9, 256);
  CHECK(v.candidate_count == 1024);
  CHECK(v.points.rows() == 256);
  CHECK_THROWS(crop_missing_ratio(gt, cam, 0.0, 256));
  CHECK_THROWS(crop_missing_ratio(gt, cam, 1.0, 256));
  CHECK_THROWS(crop_missing_ratio(gt, cam, 0.5, 600));
}

TEST_CASE("one shape gives 26 pairs with independent sampling") {
  DatasetOptions opt;
  opt.divisor = 8;
  const Dataset ds = build_dataset({default_shape(ShapeFamily::box)}, opt, 21);
  REQUIRE(ds.pairs.size() == 26);
  std::set<int> cams;
  for (const auto& p : ds.pairs) {
    cams.insert(p.camera_id);
    CHECK(p.partial.rows() == opt.partial_resolution());
    CHECK(p.complete.size() == 4);
  }
  CHECK(cams.size() == 26);
  // partial points come from a separate dense draw, not from any GT
  const DatasetPair& p0 = ds.pairs.front();
  long shared = 0;
  for (const auto& [res, gt] : p0.complete) {
    for (Index i = 0; i < p0.partial.rows(); ++i)
      for (Index j = 0; j < gt->rows(); ++j) shared += p0.partial.row(i) == gt->row(j);
  }
  CHECK(shared == 0);
  for (const auto& [res, gt] : p0.complete) CHECK(gt->rows() == res);
}

TEST_CASE("dataset generation is bit-reproducible and split by shape") {
  DatasetOptions opt;
  opt.divisor = 8;
  opt.mode = DatasetMode::mvp40;
  opt.test_fraction = 0.5;
  std::vector<ShapeSpec> specs{default_shape(ShapeFamily::sphere), default_shape(ShapeFamily::table)};
  const Dataset a = build_dataset(specs, opt, 4);
  opt.jobs = 2;
  const Dataset b = build_dataset(specs, opt, 4);
  REQUIRE(a.pairs.size() == b.pairs.size());
  for (std::size_t i = 0; i < a.pairs.size(); ++i) {
    CHECK(a.pairs[i].pair_id == b.pairs[i].pair_id);
    CHECK(test::bit_equal_points(a.pairs[i].partial, b.pairs[i].partial));
    CHECK(a.pairs[i].missing_ratio == 0.5);
  }
  std::map<std::string, std::set<Split>> splits;
  for (const auto& p : a.pairs) splits[p.shape_id].insert(p.split);
  for (const auto& [shape, s] : splits) CHECK(s.size() == 1);
  const Index n = a.pairs.front().complete.rbegin()->first;
  CHECK(a.pairs.front().partial.rows() == opt.partial_resolution());
  CHECK(n == 16384 / 8);
}

}  // TEST_SUITE
