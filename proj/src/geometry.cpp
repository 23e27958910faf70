#include "vrc/geometry.hpp"

#include <array>
#include <cmath>
#include <numbers>
#include <set>
#include <unordered_map>

namespace vrc {

using Eigen::Index;
using Eigen::Vector3d;

// ---- normalization --------------------------------------------------------

Points Normalization::invert(const Points& normalized) const {
  Points out = normalized * scale;
  out.rowwise() += centroid.transpose();
  return out;
}

Normalization normalize_unit_sphere(const Points& cloud) {
  require_nonempty(cloud, "normalize_unit_sphere");
  Normalization n;
  n.centroid = cloud.colwise().mean().transpose();
  n.points = cloud.rowwise() - n.centroid.transpose();
  const double far = n.points.rowwise().norm().maxCoeff();
  n.scale = far > 0.0 ? far : 1.0;
  if (n.scale != 1.0) n.points /= n.scale;
  return n;
}

// ---- spatial hashing ------------------------------------------------------

namespace {

class PointGrid {
 public:
  PointGrid(const Points& pts, double cell) : pts_(pts), cell_(cell) {
    lo_ = pts.colwise().minCoeff().transpose();
    for (Index i = 0; i < pts.rows(); ++i) cells_[key(cell_of(pts.row(i).transpose()))].push_back(i);
  }

  /// Calls f(j) for every point within `radius` of p (including p itself if present).
  template <typename F>
  void for_each_within(const Vector3d& p, double radius, F&& f) const {
    const auto c = cell_of(p);
    const int reach = static_cast<int>(std::ceil(radius / cell_));
    const double r2 = radius * radius;
    for (int dx = -reach; dx <= reach; ++dx) {
      for (int dy = -reach; dy <= reach; ++dy) {
        for (int dz = -reach; dz <= reach; ++dz) {
          auto it = cells_.find(key({c[0] + dx, c[1] + dy, c[2] + dz}));
          if (it == cells_.end()) continue;
          for (Index j : it->second) {
            if ((pts_.row(j).transpose() - p).squaredNorm() <= r2) f(j);
          }
        }
      }
    }
  }

 private:
  std::array<long, 3> cell_of(const Vector3d& p) const {
    return {static_cast<long>(std::floor((p[0] - lo_[0]) / cell_)),
            static_cast<long>(std::floor((p[1] - lo_[1]) / cell_)),
            static_cast<long>(std::floor((p[2] - lo_[2]) / cell_))};
  }
  static std::uint64_t key(const std::array<long, 3>& c) {
    auto u = [](long v) { return static_cast<std::uint64_t>(v + (1L << 20)) & 0x1fffffULL; };
    return (u(c[0]) << 42) | (u(c[1]) << 21) | u(c[2]);
  }

  const Points& pts_;
  double cell_;
  Vector3d lo_;
  std::unordered_map<std::uint64_t, std::vector<Index>> cells_;
};

double mean_nearest_distance(const Points& pts) {
  const Index n = pts.rows();
  const Vector3d extent = pts.colwise().maxCoeff() - pts.colwise().minCoeff();
  // Surface samples: spacing scales like sqrt(area / n); the bbox face area is
  // a generous proxy for the area.
  double cell = std::sqrt(std::max({extent[0] * extent[1], extent[1] * extent[2],
                                    extent[0] * extent[2], 1e-12}) /
                          static_cast<double>(n)) * 2.0;
  double total = 0.0;
  while (true) {
    PointGrid grid(pts, cell);
    bool all_found = true;
    total = 0.0;
    for (Index i = 0; i < n && all_found; ++i) {
      double best = std::numeric_limits<double>::infinity();
      grid.for_each_within(pts.row(i).transpose(), cell, [&](Index j) {
        if (j != i) best = std::min(best, (pts.row(j) - pts.row(i)).norm());
      });
      if (!std::isfinite(best)) all_found = false;
      total += best;
    }
    if (all_found) break;
    cell *= 2.0;
  }
  return total / static_cast<double>(n);
}

}  // namespace

double min_pairwise_distance(const Points& cloud) {
  const Index n = cloud.rows();
  if (n < 2) return std::numeric_limits<double>::infinity();
  std::vector<Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Index{0});
  std::sort(order.begin(), order.end(), [&](Index a, Index b) {
    return cloud(a, 0) < cloud(b, 0) || (cloud(a, 0) == cloud(b, 0) && a < b);
  });
  double best2 = std::numeric_limits<double>::infinity();
  for (std::size_t a = 0; a < order.size(); ++a) {
    for (std::size_t b = a + 1; b < order.size(); ++b) {
      const double dx = cloud(order[b], 0) - cloud(order[a], 0);
      if (dx * dx >= best2) break;
      best2 = std::min(best2, (cloud.row(order[b]) - cloud.row(order[a])).squaredNorm());
    }
  }
  return std::sqrt(best2);
}

// ---- Poisson disk via weighted sample elimination -------------------------

PoissonDiskResult poisson_disk_sample(const Points& dense, Index target_n,
                                      double min_oversampling) {
  const Index n = dense.rows();
  if (target_n < 1 || target_n > n ||
      static_cast<double>(n) < min_oversampling * static_cast<double>(target_n)) {
    throw std::invalid_argument("poisson_disk_sample: insufficient density, " +
                                std::to_string(n) + " dense points for target " +
                                std::to_string(target_n) + " (need ratio >= " +
                                std::to_string(min_oversampling) + ")");
  }
  PoissonDiskResult out;
  if (target_n == n) {
    out.indices.resize(static_cast<std::size_t>(n));
    std::iota(out.indices.begin(), out.indices.end(), Index{0});
    out.points = dense;
    out.min_distance = min_pairwise_distance(dense);
    return out;
  }

  // Poisson-process nearest-neighbour spacing gives the surface area estimate
  // area ~ 4 n mnn^2; the max radius is the hexagonal packing radius for target_n.
  const double mnn = mean_nearest_distance(dense);
  const double area = 4.0 * static_cast<double>(n) * mnn * mnn;
  const double r_max =
      std::sqrt(area / (2.0 * std::sqrt(3.0) * static_cast<double>(target_n)));
  const double reach = 2.0 * r_max;
  auto weight = [reach](double d) { return std::pow(1.0 - d / reach, 8); };

  PointGrid grid(dense, reach);
  std::vector<std::vector<std::pair<Index, double>>> nbrs(static_cast<std::size_t>(n));
  std::vector<double> w(static_cast<std::size_t>(n), 0.0);
  for (Index i = 0; i < n; ++i) {
    grid.for_each_within(dense.row(i).transpose(), reach, [&](Index j) {
      if (j == i) return;
      const double d = (dense.row(i) - dense.row(j)).norm();
      if (d >= reach) return;
      nbrs[i].emplace_back(j, weight(d));
    });
    std::sort(nbrs[i].begin(), nbrs[i].end());
    for (const auto& [j, wij] : nbrs[i]) w[i] += wij;
  }

  // Heaviest first; equal weights eliminate the smaller index first.
  auto cmp = [](const std::pair<double, Index>& a, const std::pair<double, Index>& b) {
    return a.first > b.first || (a.first == b.first && a.second < b.second);
  };
  std::set<std::pair<double, Index>, decltype(cmp)> heap(cmp);
  for (Index i = 0; i < n; ++i) heap.emplace(w[i], i);
  std::vector<char> alive(static_cast<std::size_t>(n), 1);
  Index remaining = n;
  while (remaining > target_n) {
    const auto top = *heap.begin();
    heap.erase(heap.begin());
    const Index i = top.second;
    alive[i] = 0;
    --remaining;
    for (const auto& [j, wij] : nbrs[i]) {
      if (!alive[j]) continue;
      heap.erase({w[j], j});
      w[j] -= wij;
      heap.emplace(w[j], j);
    }
  }
  for (Index i = 0; i < n; ++i) {
    if (alive[i]) out.indices.push_back(i);
  }
  out.points = select_rows(dense, out.indices);
  out.min_distance = min_pairwise_distance(out.points);
  return out;
}

// ---- synthetic shapes -----------------------------------------------------

std::string to_string(ShapeFamily f) {
  switch (f) {
    case ShapeFamily::sphere: return "sphere";
    case ShapeFamily::box: return "box";
    case ShapeFamily::cylinder: return "cylinder";
    case ShapeFamily::lamp: return "lamp";
    case ShapeFamily::chair: return "chair";
    case ShapeFamily::table: return "table";
  }
  return "unknown";
}

ShapeFamily shape_family_from_string(const std::string& name) {
  for (ShapeFamily f : all_shape_families()) {
    if (to_string(f) == name) return f;
  }
  throw std::invalid_argument("unknown shape family: " + name);
}

const std::vector<ShapeFamily>& all_shape_families() {
  static const std::vector<ShapeFamily> families{ShapeFamily::sphere, ShapeFamily::box,
                                                 ShapeFamily::cylinder, ShapeFamily::lamp,
                                                 ShapeFamily::chair, ShapeFamily::table};
  return families;
}

namespace {

std::size_t parameter_count(ShapeFamily f) {
  switch (f) {
    case ShapeFamily::sphere: return 1;
    case ShapeFamily::box: return 3;
    case ShapeFamily::cylinder: return 2;
    case ShapeFamily::lamp: return 7;
    case ShapeFamily::chair: return 6;
    case ShapeFamily::table: return 5;
  }
  return 0;
}

std::vector<Vector3d> symmetry_planes_of(ShapeFamily f) {
  const Vector3d x = Vector3d::UnitX(), y = Vector3d::UnitY(), z = Vector3d::UnitZ();
  switch (f) {
    case ShapeFamily::sphere:
    case ShapeFamily::box: return {x, y, z};
    case ShapeFamily::cylinder:
    case ShapeFamily::lamp:
    case ShapeFamily::table: return {x, z};
    case ShapeFamily::chair: return {x};
  }
  return {};
}

struct Part {
  enum Kind { box, tube, disk, frustum } kind;
  Vector3d center;
  Vector3d half = Vector3d::Zero();  // box half extents
  double r0 = 0, r1 = 0, height = 0;  // tube/disk/frustum, axis y

  double area() const {
    switch (kind) {
      case box: return 8.0 * (half[0] * half[1] + half[1] * half[2] + half[0] * half[2]);
      case tube: return 2.0 * std::numbers::pi * r0 * height;
      case disk: return std::numbers::pi * r0 * r0;
      case frustum: {
        const double slant = std::hypot(r1 - r0, height);
        return std::numbers::pi * (r0 + r1) * slant;
      }
    }
    return 0.0;
  }

  Vector3d sample(Rng& rng) const {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const double two_pi = 2.0 * std::numbers::pi;
    switch (kind) {
      case box: {
        const double axy = half[0] * half[1], ayz = half[1] * half[2], axz = half[0] * half[2];
        const double pick = u(rng) * (axy + ayz + axz);
        const double s = u(rng) < 0.5 ? -1.0 : 1.0;
        const double a = 2.0 * u(rng) - 1.0, b = 2.0 * u(rng) - 1.0;
        Vector3d p;
        if (pick < axy) {
          p = {a * half[0], b * half[1], s * half[2]};
        } else if (pick < axy + ayz) {
          p = {s * half[0], a * half[1], b * half[2]};
        } else {
          p = {a * half[0], s * half[1], b * half[2]};
        }
        return center + p;
      }
      case tube: {
        const double t = two_pi * u(rng);
        const double y = (u(rng) - 0.5) * height;
        return center + Vector3d(r0 * std::cos(t), y, r0 * std::sin(t));
      }
      case disk: {
        const double t = two_pi * u(rng);
        const double r = r0 * std::sqrt(u(rng));
        return center + Vector3d(r * std::cos(t), 0.0, r * std::sin(t));
      }
      case frustum: {
        // Density along the axis is proportional to the local radius.
        const double v = u(rng);
        double s = v;
        if (r0 != r1) {
          const double a = 0.5 * (r1 - r0), b = r0, c = -v * 0.5 * (r0 + r1);
          s = (-b + std::sqrt(b * b - 4.0 * a * c)) / (2.0 * a);
        }
        const double r = r0 + (r1 - r0) * s;
        const double t = two_pi * u(rng);
        return center + Vector3d(r * std::cos(t), (s - 0.5) * height, r * std::sin(t));
      }
    }
    return center;
  }
};

Part make_box(Vector3d center, Vector3d half) {
  Part p{Part::box, center};
  p.half = half;
  return p;
}

Part make_round(Part::Kind kind, Vector3d center, double r0, double r1, double height) {
  Part p{kind, center};
  p.r0 = r0;
  p.r1 = r1;
  p.height = height;
  return p;
}

void add_cylinder(std::vector<Part>& parts, Vector3d center, double r, double h) {
  parts.push_back(make_round(Part::tube, center, r, r, h));
  parts.push_back(make_round(Part::disk, center + Vector3d(0, h / 2, 0), r, r, 0));
  parts.push_back(make_round(Part::disk, center - Vector3d(0, h / 2, 0), r, r, 0));
}

void add_legs(std::vector<Part>& parts, double width, double depth, double leg, double top_y) {
  const double hy = top_y / 2;
  for (double sx : {-1.0, 1.0}) {
    for (double sz : {-1.0, 1.0}) {
      parts.push_back(make_box({sx * (width / 2 - leg / 2), hy, sz * (depth / 2 - leg / 2)},
                               {leg / 2, hy, leg / 2}));
    }
  }
}

std::vector<Part> build_parts(const ShapeSpec& spec) {
  const auto& p = spec.parameters;
  std::vector<Part> parts;
  switch (spec.family) {
    case ShapeFamily::sphere: break;  // sampled analytically
    case ShapeFamily::box:
      parts.push_back(make_box(Vector3d::Zero(), {p[0] / 2, p[1] / 2, p[2] / 2}));
      break;
    case ShapeFamily::cylinder: add_cylinder(parts, Vector3d::Zero(), p[0], p[1]); break;
    case ShapeFamily::lamp: {
      const double base_r = p[0], base_h = p[1], pole_r = p[2], pole_h = p[3];
      const double shade_r0 = p[4], shade_r1 = p[5], shade_h = p[6];
      add_cylinder(parts, {0, base_h / 2, 0}, base_r, base_h);
      parts.push_back(make_round(Part::tube, {0, base_h + pole_h / 2, 0}, pole_r, pole_r, pole_h));
      parts.push_back(make_round(Part::frustum, {0, base_h + pole_h, 0}, shade_r0, shade_r1, shade_h));
      break;
    }
    case ShapeFamily::chair: {
      const double w = p[0], d = p[1], t = p[2], seat_y = p[3], back_h = p[4], leg = p[5];
      parts.push_back(make_box({0, seat_y, 0}, {w / 2, t / 2, d / 2}));
      parts.push_back(make_box({0, seat_y + t / 2 + back_h / 2, -d / 2 + t / 2}, {w / 2, back_h / 2, t / 2}));
      add_legs(parts, w, d, leg, seat_y - t / 2);
      break;
    }
    case ShapeFamily::table: {
      const double w = p[0], d = p[1], t = p[2], height = p[3], leg = p[4];
      parts.push_back(make_box({0, height - t / 2, 0}, {w / 2, t / 2, d / 2}));
      add_legs(parts, w, d, leg, height - t);
      break;
    }
  }
  return parts;
}

}  // namespace

void ShapeSpec::validate() const {
  if (parameters.size() != parameter_count(family)) {
    throw std::invalid_argument(to_string(family) + " expects " +
                                std::to_string(parameter_count(family)) + " parameters, got " +
                                std::to_string(parameters.size()));
  }
  for (double v : parameters) {
    if (!(v > 0.0) || !std::isfinite(v)) {
      throw std::invalid_argument(to_string(family) + ": parameters must be positive and finite");
    }
  }
  for (const auto& n : symmetry_planes) {
    if (std::abs(n.norm() - 1.0) > 1e-12) {
      throw std::invalid_argument(to_string(family) + ": symmetry plane normal is not unit length");
    }
  }
  const auto& p = parameters;
  if (family == ShapeFamily::chair && (2 * p[5] >= std::min(p[0], p[1]) || p[2] >= p[3])) {
    throw std::invalid_argument("chair: legs wider than seat or seat below its thickness");
  }
  if (family == ShapeFamily::table && (2 * p[4] >= std::min(p[0], p[1]) || p[2] >= p[3])) {
    throw std::invalid_argument("table: legs wider than top or top thicker than height");
  }
  if (family == ShapeFamily::lamp && p[2] >= p[0]) {
    throw std::invalid_argument("lamp: pole wider than base");
  }
}

ShapeSpec default_shape(ShapeFamily family) {
  ShapeSpec s;
  s.family = family;
  switch (family) {
    case ShapeFamily::sphere: s.parameters = {1.0}; break;
    case ShapeFamily::box: s.parameters = {1.2, 0.8, 1.0}; break;
    case ShapeFamily::cylinder: s.parameters = {0.5, 1.4}; break;
    case ShapeFamily::lamp: s.parameters = {0.35, 0.06, 0.03, 1.0, 0.4, 0.2, 0.35}; break;
    case ShapeFamily::chair: s.parameters = {1.0, 0.9, 0.08, 0.9, 1.0, 0.08}; break;
    case ShapeFamily::table: s.parameters = {1.6, 1.0, 0.08, 0.9, 0.08}; break;
  }
  s.symmetry_planes = symmetry_planes_of(family);
  return s;
}

ShapeSpec random_shape(ShapeFamily family, Rng& rng, double jitter) {
  ShapeSpec s = default_shape(family);
  std::uniform_real_distribution<double> u(1.0 - jitter, 1.0 + jitter);
  for (double& v : s.parameters) v *= u(rng);
  s.validate();
  return s;
}

PointCloud synth_shape(const ShapeSpec& spec, Index n_dense, std::uint64_t rng_seed) {
  if (n_dense < 1024) {
    throw std::invalid_argument("synth_shape: n_dense must be >= 1024, got " +
                                std::to_string(n_dense));
  }
  spec.validate();
  Rng rng(rng_seed);
  PointCloud cloud;
  cloud.category = to_string(spec.family);
  cloud.source = CloudSource::synthetic;
  cloud.points.resize(n_dense, 3);

  if (spec.family == ShapeFamily::sphere) {
    std::normal_distribution<double> g(0.0, 1.0);
    for (Index i = 0; i < n_dense; ++i) {
      Vector3d v;
      do {
        v = {g(rng), g(rng), g(rng)};
      } while (v.norm() < 1e-12);
      cloud.points.row(i) = (spec.parameters[0] * v.normalized()).transpose();
    }
    return cloud;
  }

  const auto parts = build_parts(spec);
  std::vector<double> cdf;
  double total = 0.0;
  for (const auto& part : parts) cdf.push_back(total += part.area());
  std::uniform_real_distribution<double> u(0.0, total);
  for (Index i = 0; i < n_dense; ++i) {
    const double pick = u(rng);
    auto k = static_cast<std::size_t>(std::upper_bound(cdf.begin(), cdf.end(), pick) - cdf.begin());
    k = std::min(k, parts.size() - 1);
    cloud.points.row(i) = parts[k].sample(rng).transpose();
  }
  return cloud;
}

}  // namespace vrc
