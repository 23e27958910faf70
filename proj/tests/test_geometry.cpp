#include "support.hpp"

using namespace vrc;

TEST_SUITE("geometry") {

TEST_CASE("knn on three collinear points") {
  Points p(3, 3);
  p << 0, 0, 0, 1, 0, 0, 3, 0, 0;
  const NeighborTable nn = knn(p, p, 2);
  CHECK(nn(0, 0) == 0);
  CHECK(nn(0, 1) == 1);
  CHECK(nn(2, 1) == 1);
}

TEST_CASE("knn with k = N gives a permutation per row") {
  const Points p = test::random_cloud(12, 1);
  const NeighborTable nn = knn(p, p, 12);
  for (Index i = 0; i < 12; ++i) {
    std::vector<Index> row(nn.row(i).begin(), nn.row(i).end());
    std::sort(row.begin(), row.end());
    for (Index j = 0; j < 12; ++j) CHECK(row[j] == j);
  }
}

TEST_CASE("knn breaks distance ties by lower index") {
  Points p(4, 3);
  p << 1, 0, 0, 1, 0, 0, -1, 0, 0, 1, 0, 0;
  Points q(1, 3);
  q << 0, 0, 0;
  const NeighborTable nn = knn(p, q, 4);
  for (Index j = 0; j < 4; ++j) CHECK(nn(0, j) == j);
  CHECK_THROWS(knn(p, q, 5));
}

TEST_CASE("knn matches a brute-force oracle") {
  const Points p = test::random_cloud(40, 2);
  const Points q = test::random_cloud(10, 3);
  const NeighborTable nn = knn(p, q, 7);
  for (Index i = 0; i < q.rows(); ++i) {
    const auto want = test::oracle_knn_row(p, q.row(i), 7);
    for (Index j = 0; j < 7; ++j) CHECK(nn(i, j) == want[j]);
  }
}

TEST_CASE("knn is permutation-equivariant on distinct-distance clouds") {
  const Points p = test::random_cloud(30, 4);
  REQUIRE(test::distinct_distances(p));
  const auto perm = test::random_permutation(30, 5);
  std::vector<Index> inv(30);
  for (Index i = 0; i < 30; ++i) inv[perm[i]] = i;
  const NeighborTable a = knn(p, p, 6);
  const Points pp = test::permute_rows(p, perm);
  const NeighborTable b = knn(pp, pp, 6);
  for (Index i = 0; i < 30; ++i)
    for (Index j = 0; j < 6; ++j) CHECK(perm[b(i, j)] == a(perm[i], j));
}

TEST_CASE("farthest point sampling on a unit square") {
  Points sq(4, 3);
  sq << 0, 0, 0, 1, 0, 0, 0, 1, 0, 1, 1, 0;
  const IndexList two = farthest_point_sample(sq, 2, 0);
  CHECK(two == IndexList{0, 3});
  CHECK(farthest_point_sample(sq, 1, 2) == IndexList{2});
  const IndexList all = farthest_point_sample(sq, 4, 0);
  CHECK(all.size() == 4);
  CHECK(all == farthest_point_sample(sq, 4, 0));
  CHECK_THROWS(farthest_point_sample(sq, 5, 0));
}

TEST_CASE("farthest point sampling satisfies the greedy definition") {
  const Points p = test::random_cloud(200, 6);
  const IndexList pick = farthest_point_sample(p, 50, 17);
  CHECK(pick[0] == 17);
  for (std::size_t s = 1; s < pick.size(); ++s) {
    double best = -1;
    Index arg = -1;
    for (Index j = 0; j < p.rows(); ++j) {
      if (std::find(pick.begin(), pick.begin() + s, j) != pick.begin() + s) continue;
      double dmin = std::numeric_limits<double>::infinity();
      for (std::size_t t = 0; t < s; ++t) dmin = std::min(dmin, test::sq_dist(p, j, p, pick[t]));
      if (dmin > best) {
        best = dmin;
        arg = j;
      }
    }
    CHECK(pick[s] == arg);
  }
}

TEST_CASE("poisson disk on a grid with nothing to remove") {
  Points grid(27, 3);
  Index r = 0;
  for (int x = 0; x < 3; ++x)
    for (int y = 0; y < 3; ++y)
      for (int z = 0; z < 3; ++z) grid.row(r++) << x, y, z;
  const PoissonDiskResult res = poisson_disk_sample(grid, 27, 1.0);
  CHECK(res.indices.size() == 27);
  CHECK(test::bit_equal_points(res.points, grid));
}

TEST_CASE("poisson disk spacing beats a random subset") {
  const Points dense = synth_shape(default_shape(ShapeFamily::sphere), 8192, 9).points;
  const PoissonDiskResult pds = poisson_disk_sample(dense, 2048);
  CHECK(pds.points.rows() == 2048);
  const auto perm = test::random_permutation(8192, 10);
  IndexList sub(perm.begin(), perm.begin() + 2048);
  const double random_min = min_pairwise_distance(select_rows(dense, sub));
  CHECK(pds.min_distance >= 1.5 * random_min);
  CHECK(pds.min_distance == min_pairwise_distance(pds.points));
  CHECK(pds.min_distance >= min_pairwise_distance(dense));
  for (std::size_t i = 0; i < pds.indices.size(); ++i) {
    CHECK(test::bit_equal(Eigen::VectorXd(pds.points.row(i).transpose()),
                          Eigen::VectorXd(dense.row(pds.indices[i]).transpose())));
  }
  CHECK(std::is_sorted(pds.indices.begin(), pds.indices.end()));
}

TEST_CASE("poisson disk removes one of a coincident pair first") {
  Points p = test::random_cloud(20, 11);
  p.row(7) = p.row(3);
  const PoissonDiskResult res = poisson_disk_sample(p, 19, 1.0);
  const bool has3 = std::count(res.indices.begin(), res.indices.end(), 3) == 1;
  const bool has7 = std::count(res.indices.begin(), res.indices.end(), 7) == 1;
  CHECK(has3 != has7);
}

TEST_CASE("poisson disk rejects insufficient density") {
  const Points p = test::random_cloud(100, 12);
  CHECK_THROWS(poisson_disk_sample(p, 50));
  CHECK_THROWS(poisson_disk_sample(p, 101, 1.0));
}

TEST_CASE("normalize_unit_sphere") {
  Points two(2, 3);
  two << 2, 0, 0, 4, 0, 0;
  const Normalization n = normalize_unit_sphere(two);
  CHECK(n.points(0, 0) == -1.0);
  CHECK(n.points(1, 0) == 1.0);
  CHECK(n.centroid == Eigen::Vector3d(3, 0, 0));
  CHECK(n.scale == 1.0);

  Points one(1, 3);
  one << 5, -2, 7;
  const Normalization s = normalize_unit_sphere(one);
  CHECK(s.points.isZero(0));
  CHECK(s.scale == 1.0);

  const Normalization again = normalize_unit_sphere(n.points);
  CHECK(again.scale == 1.0);
  CHECK(again.centroid.isZero(0));

  const Points p = test::random_cloud(50, 13, 4.0);
  const Normalization r = normalize_unit_sphere(p);
  CHECK(r.points.colwise().mean().norm() < 1e-9);
  CHECK(r.points.rowwise().norm().maxCoeff() <= 1 + 1e-9);
  CHECK(test::max_abs_diff(Eigen::Map<const Eigen::VectorXd>(r.invert(r.points).data(), p.size()),
                           Eigen::Map<const Eigen::VectorXd>(p.data(), p.size())) < 1e-12);
}

TEST_CASE("synthetic shapes") {
  const PointCloud sphere = synth_shape(default_shape(ShapeFamily::sphere), 2048, 1);
  CHECK(sphere.size() == 2048);
  const ShapeSpec unit{ShapeFamily::sphere, {1.0}, {}};
  const PointCloud us = synth_shape(unit, 1024, 2);
  CHECK((us.points.rowwise().norm().array() - 1.0).abs().maxCoeff() < 1e-9);

  for (ShapeFamily f : all_shape_families()) {
    const ShapeSpec spec = default_shape(f);
    const Points a = synth_shape(spec, 1024, 5).points;
    CHECK(test::bit_equal_points(a, synth_shape(spec, 1024, 5).points));
    CHECK(a.allFinite());
  }
  CHECK_THROWS(synth_shape(ShapeSpec{ShapeFamily::box, {1.0, -1.0, 1.0}, {}}, 1024, 1));
  CHECK_THROWS(synth_shape(default_shape(ShapeFamily::box), 100, 1));
}

TEST_CASE("chair is symmetric under its declared plane") {
  const ShapeSpec chair = default_shape(ShapeFamily::chair);
  REQUIRE_FALSE(chair.symmetry_planes.empty());
  const Points p = normalize_unit_sphere(synth_shape(chair, 8192, 3).points).points;
  const Eigen::Vector3d n = chair.symmetry_planes.front();
  // the normalized frame is centred on the centroid, which lies on the plane
  CHECK(chamfer_distance(p, mirror(p, n)) < 1e-3);
}

TEST_CASE("mirror") {
  Points p(2, 3);
  p << 0, 2, 3, 1, 0, 0;
  const Points m = mirror(p, Eigen::Vector3d(1, 0, 0));
  CHECK(m.row(0) == p.row(0));
  CHECK(m.row(1) == Eigen::RowVector3d(-1, 0, 0));
  CHECK_THROWS(mirror(p, Eigen::Vector3d::Zero()));
  const Points q = test::random_cloud(64, 14);
  for (const Eigen::Vector3d n : {Eigen::Vector3d(1, 0, 0), Eigen::Vector3d(0, 1, 0), Eigen::Vector3d(0, 0, 1)}) {
    CHECK(test::bit_equal_points(mirror(mirror(q, n), n), q));
  }
  const Eigen::Vector3d oblique = Eigen::Vector3d(1, 2, -0.5).normalized();
  CHECK((mirror(mirror(q, oblique), oblique) - q).cwiseAbs().maxCoeff() < 1e-15);
}

}  // TEST_SUITE
