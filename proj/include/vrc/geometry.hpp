#pragma once

#include "vrc/random.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

namespace vrc {

template <typename Scalar>
using PointsT = Eigen::Matrix<Scalar, Eigen::Dynamic, 3, Eigen::RowMajor>;
using Points = PointsT<double>;
using IndexList = std::vector<Eigen::Index>;
using NeighborTable =
    Eigen::Matrix<Eigen::Index, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

enum class CloudSource { synthetic, file };

struct PointCloud {
  Points points;
  std::string category;
  CloudSource source = CloudSource::synthetic;
  bool normalized = false;

  Eigen::Index size() const { return points.rows(); }
};

template <typename Derived>
void require_nonempty(const Eigen::MatrixBase<Derived>& pts, const char* what) {
  if (pts.rows() == 0) throw std::invalid_argument(std::string(what) + ": empty point cloud");
}

/// k nearest points of `cloud` for every query row, ascending by distance with
/// ties broken by the smaller index.
template <typename DerivedC, typename DerivedQ>
NeighborTable knn(const Eigen::MatrixBase<DerivedC>& cloud,
                  const Eigen::MatrixBase<DerivedQ>& queries, Eigen::Index k) {
  using Scalar = typename DerivedC::Scalar;
  const Eigen::Index n = cloud.rows();
  if (k < 1 || k > n) {
    throw std::invalid_argument("knn: k=" + std::to_string(k) + " but cloud has " +
                                std::to_string(n) + " points");
  }
  NeighborTable out(queries.rows(), k);
  std::vector<Scalar> d2(static_cast<std::size_t>(n));
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  for (Eigen::Index q = 0; q < queries.rows(); ++q) {
    for (Eigen::Index j = 0; j < n; ++j) {
      d2[j] = (cloud.row(j) - queries.row(q)).squaredNorm();
    }
    std::iota(order.begin(), order.end(), Eigen::Index{0});
    auto less = [&](Eigen::Index a, Eigen::Index b) {
      return d2[a] < d2[b] || (d2[a] == d2[b] && a < b);
    };
    std::partial_sort(order.begin(), order.begin() + k, order.end(), less);
    for (Eigen::Index j = 0; j < k; ++j) out(q, j) = order[j];
  }
  return out;
}

/// Greedy farthest point sampling seeded at `seed_index`; ties go to the
/// smaller index.
template <typename Derived>
IndexList farthest_point_sample(const Eigen::MatrixBase<Derived>& cloud, Eigen::Index m,
                                Eigen::Index seed_index = 0) {
  using Scalar = typename Derived::Scalar;
  const Eigen::Index n = cloud.rows();
  if (m < 1 || m > n) {
    throw std::invalid_argument("farthest_point_sample: m=" + std::to_string(m) +
                                " outside [1, " + std::to_string(n) + "]");
  }
  if (seed_index < 0 || seed_index >= n) {
    throw std::invalid_argument("farthest_point_sample: seed index out of range");
  }
  IndexList picked{seed_index};
  picked.reserve(static_cast<std::size_t>(m));
  std::vector<Scalar> best(static_cast<std::size_t>(n), std::numeric_limits<Scalar>::infinity());
  std::vector<char> taken(static_cast<std::size_t>(n), 0);
  taken[seed_index] = 1;
  const PointsT<Scalar> pts = cloud;
  const Scalar* p = pts.data();
  Eigen::Index last = seed_index;
  while (static_cast<Eigen::Index>(picked.size()) < m) {
    Eigen::Index arg = -1;
    Scalar far = -1;
    const Scalar lx = p[3 * last], ly = p[3 * last + 1], lz = p[3 * last + 2];
    for (Eigen::Index j = 0; j < n; ++j) {
      if (taken[j]) continue;
      const Scalar dx = p[3 * j] - lx, dy = p[3 * j + 1] - ly, dz = p[3 * j + 2] - lz;
      const Scalar d = dx * dx + dy * dy + dz * dz;
      if (d < best[j]) best[j] = d;
      if (best[j] > far) {
        far = best[j];
        arg = j;
      }
    }
    taken[arg] = 1;
    picked.push_back(arg);
    last = arg;
  }
  return picked;
}

/// Row farthest from the origin, ties to the lexicographically largest
/// coordinates. Depends only on the point set, not on the row order, so it is
/// a permutation-stable FPS seed.
template <typename Derived>
Eigen::Index extreme_point_index(const Eigen::MatrixBase<Derived>& cloud) {
  if (cloud.rows() == 0) throw std::invalid_argument("extreme_point_index: empty cloud");
  auto key = [&](Eigen::Index i) {
    const auto r = cloud.row(i);
    return std::array<typename Derived::Scalar, 4>{r.squaredNorm(), r(0), r(1), r(2)};
  };
  Eigen::Index best = 0;
  auto best_key = key(0);
  for (Eigen::Index i = 1; i < cloud.rows(); ++i) {
    const auto k = key(i);
    if (k > best_key) {
      best_key = k;
      best = i;
    }
  }
  return best;
}

template <typename Derived>
PointsT<typename Derived::Scalar> select_rows(const Eigen::MatrixBase<Derived>& cloud,
                                              const IndexList& idx) {
  PointsT<typename Derived::Scalar> out(static_cast<Eigen::Index>(idx.size()), 3);
  for (std::size_t i = 0; i < idx.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = cloud.row(idx[i]);
  return out;
}

/// Reflection p - 2 (p.n) n across the plane through the origin with normal n.
template <typename Derived>
PointsT<typename Derived::Scalar> mirror(const Eigen::MatrixBase<Derived>& cloud,
                                         const Eigen::Vector3d& plane_normal) {
  using Scalar = typename Derived::Scalar;
  const double len = plane_normal.norm();
  if (!(len > 0.0)) throw std::invalid_argument("mirror: zero plane normal");
  const Eigen::Matrix<Scalar, 1, 3> n = (plane_normal / len).transpose().template cast<Scalar>();
  PointsT<Scalar> out = cloud;
  for (Eigen::Index i = 0; i < out.rows(); ++i) {
    const Scalar dot = out.row(i).dot(n);
    out.row(i) -= Scalar(2) * dot * n;
  }
  return out;
}

struct Normalization {
  Points points;
  Eigen::Vector3d centroid = Eigen::Vector3d::Zero();
  double scale = 1.0;

  /// Maps normalized coordinates back to the input frame.
  Points invert(const Points& normalized) const;
};

/// Centers on the centroid and scales so the farthest point has norm 1.
Normalization normalize_unit_sphere(const Points& cloud);

struct PoissonDiskResult {
  IndexList indices;  // ascending, into the dense input
  Points points;
  double min_distance = 0.0;
};

/// Weighted sample elimination: repeatedly removes the point with the largest
/// neighbourhood weight until `target_n` remain. `min_oversampling` guards the
/// dense:target ratio the elimination needs to produce even spacing.
PoissonDiskResult poisson_disk_sample(const Points& dense, Eigen::Index target_n,
                                      double min_oversampling = 4.0);

/// Smallest pairwise Euclidean distance (sorted sweep along x).
double min_pairwise_distance(const Points& cloud);

enum class ShapeFamily { sphere, box, cylinder, lamp, chair, table };

std::string to_string(ShapeFamily f);
ShapeFamily shape_family_from_string(const std::string& name);
const std::vector<ShapeFamily>& all_shape_families();

struct ShapeSpec {
  ShapeFamily family = ShapeFamily::sphere;
  /// Per-family dimensions, see `default_shape`.
  std::vector<double> parameters;
  std::vector<Eigen::Vector3d> symmetry_planes;

  void validate() const;
};

/// Canonical dimensions. y is up; chairs face +z with the back at -z.
///   sphere   {radius}
///   box      {width, height, depth}
///   cylinder {radius, height}
///   lamp     {base_radius, base_height, pole_radius, pole_height,
///             shade_bottom_radius, shade_top_radius, shade_height}
///   chair    {seat_width, seat_depth, seat_thickness, seat_height, back_height, leg_width}
///   table    {top_width, top_depth, top_thickness, height, leg_width}
ShapeSpec default_shape(ShapeFamily family);
/// Default dimensions jittered by up to +-`jitter` (relative), seeded.
ShapeSpec random_shape(ShapeFamily family, Rng& rng, double jitter = 0.2);

/// Area-uniform samples on the analytic surface. Deterministic for a seed.
PointCloud synth_shape(const ShapeSpec& spec, Eigen::Index n_dense, std::uint64_t rng_seed);

}  // namespace vrc
