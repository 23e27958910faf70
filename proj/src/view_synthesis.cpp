#include "vrc/view_synthesis.hpp"

#include <array>
#include <cstdio>
#include <cmath>
#include <future>
#include <iostream>
#include <unordered_map>

namespace vrc {

using Eigen::Index;
using Eigen::Vector3d;

Eigen::Matrix<double, 26, 3, Eigen::RowMajor> base_camera_directions() {
  Eigen::Matrix<double, 26, 3, Eigen::RowMajor> dirs;
  int row = 0;
  for (int x = -1; x <= 1; ++x) {
    for (int y = -1; y <= 1; ++y) {
      for (int z = -1; z <= 1; ++z) {
        if (x == 0 && y == 0 && z == 0) continue;
        dirs.row(row++) = Vector3d(x, y, z).normalized().transpose();
      }
    }
  }
  return dirs;
}

CameraPoseSet camera_poses_26(std::uint64_t rng_seed, double radius) {
  Rng rng(rng_seed);
  std::normal_distribution<double> g(0.0, 1.0);
  // A normalized 4D Gaussian is a uniformly distributed unit quaternion.
  Eigen::Vector4d q;
  do {
    q = {g(rng), g(rng), g(rng), g(rng)};
  } while (q.norm() < 1e-12);
  q.normalize();
  CameraPoseSet set;
  set.global_rotation = Eigen::Quaterniond(q[0], q[1], q[2], q[3]).toRotationMatrix();
  set.radius = radius;
  set.directions = base_camera_directions() * set.global_rotation.transpose();
  for (int i = 0; i < 26; ++i) set.directions.row(i).normalize();
  return set;
}

// ---- Quickhull ------------------------------------------------------------

namespace {

struct HullFace {
  std::array<int, 3> v{};
  std::array<int, 3> nbr{-1, -1, -1};  // across edge v[i] -> v[i+1]
  Vector3d normal = Vector3d::Zero();
  double offset = 0.0;
  std::vector<int> outside;
  bool alive = true;
  int mark = -1;
};

std::uint64_t edge_key(int a, int b) {
  return (static_cast<std::uint64_t>(static_cast<std::uint32_t>(a)) << 32) |
         static_cast<std::uint32_t>(b);
}

class Quickhull {
 public:
  explicit Quickhull(const Points& pts) : p_(pts) {
    const double scale = std::max(pts.cwiseAbs().maxCoeff(), 1.0);
    eps_ = 1e-10 * scale;
  }

  std::vector<char> run() {
    const Index n = p_.rows();
    std::vector<char> on_hull(static_cast<std::size_t>(n), 0);
    if (n < 4 || !build_simplex()) {
      std::fill(on_hull.begin(), on_hull.end(), 1);
      return on_hull;
    }
    for (std::size_t f = 0; f < faces_.size(); ++f) {
      if (faces_[f].alive && !faces_[f].outside.empty()) expand(static_cast<int>(f));
    }
    for (const auto& f : faces_) {
      if (!f.alive) continue;
      for (int v : f.v) on_hull[v] = 1;
    }
    return on_hull;
  }

 private:
  Vector3d pt(int i) const { return p_.row(i).transpose(); }
  double dist(const HullFace& f, int i) const { return f.normal.dot(pt(i)) - f.offset; }

  int make_face(int a, int b, int c) {
    HullFace f;
    f.v = {a, b, c};
    const Vector3d n = (pt(b) - pt(a)).cross(pt(c) - pt(a));
    const double len = n.norm();
    f.normal = len > 0.0 ? Vector3d(n / len) : Vector3d::Zero();
    f.offset = f.normal.dot(pt(a));
    faces_.push_back(std::move(f));
    return static_cast<int>(faces_.size()) - 1;
  }

  bool build_simplex() {
    const Index n = p_.rows();
    std::array<int, 6> ext{};
    for (int axis = 0; axis < 3; ++axis) {
      Index lo = 0, hi = 0;
      p_.col(axis).minCoeff(&lo);
      p_.col(axis).maxCoeff(&hi);
      ext[2 * axis] = static_cast<int>(lo);
      ext[2 * axis + 1] = static_cast<int>(hi);
    }
    int a = ext[0], b = ext[1];
    double best = -1.0;
    for (int i : ext) {
      for (int j : ext) {
        const double d = (pt(i) - pt(j)).squaredNorm();
        if (d > best) {
          best = d;
          a = i;
          b = j;
        }
      }
    }
    if (best <= eps_ * eps_) return false;
    const Vector3d ab = (pt(b) - pt(a)).normalized();
    int c = -1;
    best = eps_;
    for (Index i = 0; i < n; ++i) {
      const Vector3d ap = pt(static_cast<int>(i)) - pt(a);
      const double d = (ap - ap.dot(ab) * ab).norm();
      if (d > best) {
        best = d;
        c = static_cast<int>(i);
      }
    }
    if (c < 0) return false;
    const Vector3d nrm = (pt(b) - pt(a)).cross(pt(c) - pt(a)).normalized();
    int d = -1;
    best = eps_;
    for (Index i = 0; i < n; ++i) {
      const double h = std::abs(nrm.dot(pt(static_cast<int>(i)) - pt(a)));
      if (h > best) {
        best = h;
        d = static_cast<int>(i);
      }
    }
    if (d < 0) return false;

    const std::array<std::array<int, 4>, 4> tris{{{a, b, c, d}, {a, c, d, b}, {a, d, b, c}, {b, d, c, a}}};
    for (const auto& t : tris) {
      const int f = make_face(t[0], t[1], t[2]);
      if (dist(faces_[f], t[3]) > 0.0) {
        faces_.pop_back();
        make_face(t[0], t[2], t[1]);
      }
    }
    std::unordered_map<std::uint64_t, int> edges;
    for (int f = 0; f < 4; ++f) {
      for (int e = 0; e < 3; ++e) edges[edge_key(faces_[f].v[e], faces_[f].v[(e + 1) % 3])] = f;
    }
    for (int f = 0; f < 4; ++f) {
      for (int e = 0; e < 3; ++e) {
        faces_[f].nbr[e] = edges.at(edge_key(faces_[f].v[(e + 1) % 3], faces_[f].v[e]));
      }
    }
    const std::array<int, 4> simplex{a, b, c, d};
    for (Index i = 0; i < n; ++i) {
      const int idx = static_cast<int>(i);
      if (std::find(simplex.begin(), simplex.end(), idx) != simplex.end()) continue;
      for (int f = 0; f < 4; ++f) {
        if (dist(faces_[f], idx) > eps_) {
          faces_[f].outside.push_back(idx);
          break;
        }
      }
    }
    return true;
  }

  void expand(int start) {
    ++round_;
    HullFace& sf = faces_[start];
    int eye = sf.outside.front();
    double far = dist(sf, eye);
    for (int i : sf.outside) {
      const double d = dist(sf, i);
      if (d > far) {
        far = d;
        eye = i;
      }
    }

    std::vector<int> visible{start};
    faces_[start].mark = round_;
    for (std::size_t k = 0; k < visible.size(); ++k) {
      const HullFace& f = faces_[visible[k]];
      for (int nb : f.nbr) {
        if (faces_[nb].mark == round_) continue;
        if (dist(faces_[nb], eye) > eps_) {
          faces_[nb].mark = round_;
          visible.push_back(nb);
        }
      }
    }

    std::vector<int> created;
    std::unordered_map<std::uint64_t, std::pair<int, int>> open_edges;
    for (int vf : visible) {
      for (int e = 0; e < 3; ++e) {
        const int nb = faces_[vf].nbr[e];
        if (faces_[nb].mark == round_) continue;
        const int a = faces_[vf].v[e], b = faces_[vf].v[(e + 1) % 3];
        const int nf = make_face(a, b, eye);
        faces_[nf].nbr[0] = nb;
        auto& back = faces_[nb].nbr;
        for (int& slot : back) {
          if (slot == vf) slot = nf;
        }
        open_edges[edge_key(b, eye)] = {nf, 1};
        open_edges[edge_key(eye, a)] = {nf, 2};
        created.push_back(nf);
      }
    }
    for (int nf : created) {
      for (int e = 1; e < 3; ++e) {
        const int u = faces_[nf].v[e], w = faces_[nf].v[(e + 1) % 3];
        faces_[nf].nbr[e] = open_edges.at(edge_key(w, u)).first;
      }
    }

    for (int vf : visible) {
      faces_[vf].alive = false;
      std::vector<int> pts = std::move(faces_[vf].outside);
      faces_[vf].outside.clear();
      for (int i : pts) {
        if (i == eye) continue;
        for (int nf : created) {
          if (dist(faces_[nf], i) > eps_) {
            faces_[nf].outside.push_back(i);
            break;
          }
        }
      }
    }
  }

  const Points& p_;
  double eps_ = 0.0;
  int round_ = 0;
  std::vector<HullFace> faces_;
};

}  // namespace

std::vector<char> convex_hull_vertices(const Points& pts) { return Quickhull(pts).run(); }

IndexList hidden_point_removal(const Points& cloud, const Vector3d& camera, double gamma) {
  require_nonempty(cloud, "hidden_point_removal");
  const Index n = cloud.rows();
  Points rel = cloud.rowwise() - camera.transpose();
  const Eigen::VectorXd norms = rel.rowwise().norm();
  const double radius = gamma * norms.maxCoeff();
  // Row n is the camera itself (the origin of the flipped frame).
  Points flipped(n + 1, 3);
  for (Index i = 0; i < n; ++i) {
    const double r = norms[i];
    flipped.row(i) = r > 0.0 ? Eigen::RowVector3d(rel.row(i) * ((2.0 * radius - r) / r))
                             : Eigen::RowVector3d::Zero();
  }
  flipped.row(n).setZero();
  const auto on_hull = convex_hull_vertices(flipped);
  IndexList visible;
  for (Index i = 0; i < n; ++i) {
    if (on_hull[i]) visible.push_back(i);
  }
  return visible;
}

PartialView render_partial(const Points& dense, const Vector3d& camera_position, Index target_n,
                           double gamma) {
  require_nonempty(dense, "render_partial");
  if (camera_position.norm() <= 1.0) {
    throw std::invalid_argument("render_partial: camera must lie outside the unit sphere");
  }
  const IndexList visible = hidden_point_removal(dense, camera_position, gamma);
  const auto count = static_cast<Index>(visible.size());
  if (count < target_n) {
    throw UnderVisibilityError("render_partial: only " + std::to_string(count) +
                               " visible points for target " + std::to_string(target_n));
  }
  const Points candidates = select_rows(dense, visible);
  const IndexList picked = farthest_point_sample(candidates, target_n, 0);
  PartialView out;
  out.candidate_count = count;
  out.points = select_rows(candidates, picked);
  for (Index i : picked) out.source_indices.push_back(visible[i]);
  return out;
}

PartialView crop_missing_ratio(const Points& complete, const Vector3d& camera_position,
                               double missing_ratio, Index target_n) {
  require_nonempty(complete, "crop_missing_ratio");
  if (!(missing_ratio > 0.0 && missing_ratio < 1.0)) {
    throw std::invalid_argument("crop_missing_ratio: ratio must lie in (0, 1), got " +
                                std::to_string(missing_ratio));
  }
  if (missing_ratio != 0.25 && missing_ratio != 0.5) {
    std::clog << "warning: crop_missing_ratio with non-standard ratio " << missing_ratio << '\n';
  }
  const Index n = complete.rows();
  const auto dropped = static_cast<Index>(std::floor(missing_ratio * static_cast<double>(n)));
  const Index kept_n = n - dropped;
  if (target_n < 1 || target_n > kept_n) {
    throw std::invalid_argument("crop_missing_ratio: target " + std::to_string(target_n) +
                                " exceeds the " + std::to_string(kept_n) + " kept points");
  }
  std::vector<double> d2(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) d2[i] = (complete.row(i).transpose() - camera_position).squaredNorm();
  IndexList order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Index{0});
  std::sort(order.begin(), order.end(),
            [&](Index a, Index b) { return d2[a] < d2[b] || (d2[a] == d2[b] && a < b); });
  IndexList kept(order.begin(), order.begin() + kept_n);
  std::sort(kept.begin(), kept.end());

  const Points candidates = select_rows(complete, kept);
  const IndexList picked = farthest_point_sample(candidates, target_n, 0);
  PartialView out;
  out.candidate_count = kept_n;
  out.points = select_rows(candidates, picked);
  for (Index i : picked) out.source_indices.push_back(kept[i]);
  return out;
}

// ---- dataset --------------------------------------------------------------

std::string to_string(DatasetMode m) { return m == DatasetMode::mvp ? "mvp" : "mvp40"; }

DatasetMode dataset_mode_from_string(const std::string& s) {
  if (s == "mvp") return DatasetMode::mvp;
  if (s == "mvp40") return DatasetMode::mvp40;
  throw std::invalid_argument("unknown dataset mode: " + s);
}

std::string to_string(Split s) { return s == Split::train ? "train" : "test"; }

std::vector<Index> DatasetOptions::resolutions() const {
  std::vector<Index> out;
  for (Index r : base_resolutions) out.push_back(r / divisor);
  return out;
}

void DatasetOptions::validate() const {
  if (divisor < 1) throw std::invalid_argument("dataset divisor must be >= 1");
  if (base_resolutions.empty()) throw std::invalid_argument("no ground-truth resolutions");
  for (Index r : base_resolutions) {
    if (r != 2048 && r != 4096 && r != 8192 && r != 16384) {
      throw std::invalid_argument("resolution " + std::to_string(r) +
                                  " not in {2048, 4096, 8192, 16384}");
    }
    if (r % divisor != 0) throw std::invalid_argument("divisor does not divide resolution");
  }
  if (partial_resolution() < 1) throw std::invalid_argument("partial resolution below 1");
  if (mode == DatasetMode::mvp40 && !(missing_ratio > 0.0 && missing_ratio < 1.0)) {
    throw std::invalid_argument("missing ratio must lie in (0, 1)");
  }
  if (test_fraction < 0.0 || test_fraction >= 1.0) {
    throw std::invalid_argument("test fraction must lie in [0, 1)");
  }
  if (camera_radius <= 1.0) throw std::invalid_argument("camera radius must exceed 1");
}

namespace {

struct ShapeOutput {
  ShapeSample shape;
  std::vector<DatasetPair> pairs;
};

ShapeOutput generate_shape(const ShapeSpec& spec, std::size_t shape_index, Split split,
                           const DatasetOptions& opt, std::uint64_t base) {
  ShapeOutput out;
  auto& shape = out.shape;
  char id[32];
  std::snprintf(id, sizeof id, "%s_%04zu", to_string(spec.family).c_str(), shape_index);
  shape.shape_id = id;
  shape.category = to_string(spec.family);
  shape.spec = spec;
  shape.split = split;

  const auto resolutions = opt.resolutions();
  const Index max_res = *std::max_element(resolutions.begin(), resolutions.end());
  const Index partial_n = opt.partial_resolution();

  // Ground truth and partial source are drawn from independent surface samples.
  const PointCloud gt_dense = synth_shape(spec, std::max<Index>(4 * max_res, 1024),
                                          derive_seed(base, shape_index, 1));
  const Normalization norm = normalize_unit_sphere(gt_dense.points);
  for (Index r : resolutions) {
    auto pds = poisson_disk_sample(norm.points, r);
    shape.complete[r] = std::make_shared<const Points>(std::move(pds.points));
  }

  const Index source_n = opt.mode == DatasetMode::mvp ? std::max<Index>(16 * partial_n, 1024)
                                                      : std::max<Index>(max_res, 1024);
  const PointCloud src = synth_shape(spec, source_n, derive_seed(base, shape_index, 2));
  Points source = src.points.rowwise() - norm.centroid.transpose();
  source /= norm.scale;

  const CameraPoseSet cams = camera_poses_26(derive_seed(base, shape_index, 3), opt.camera_radius);
  for (int cam = 0; cam < 26; ++cam) {
    DatasetPair pair;
    char pid[48];
    std::snprintf(pid, sizeof pid, "%s_v%02d", shape.shape_id.c_str(), cam);
    pair.pair_id = pid;
    pair.shape_id = shape.shape_id;
    pair.category = shape.category;
    pair.camera_id = cam;
    pair.split = split;
    pair.complete = shape.complete;
    try {
      if (opt.mode == DatasetMode::mvp) {
        pair.partial = render_partial(source, cams.position(cam), partial_n, opt.hpr_gamma).points;
      } else {
        pair.missing_ratio = opt.missing_ratio;
        pair.partial =
            crop_missing_ratio(source, cams.position(cam), opt.missing_ratio, partial_n).points;
      }
    } catch (const std::exception& e) {
      throw std::runtime_error("dataset generation failed for shape " + shape.shape_id +
                               " camera " + std::to_string(cam) + ": " + e.what());
    }
    out.pairs.push_back(std::move(pair));
  }
  return out;
}

}  // namespace

Dataset build_dataset(const std::vector<ShapeSpec>& specs, const DatasetOptions& options,
                      std::uint64_t rng_seed) {
  options.validate();
  Dataset ds;
  ds.options = options;
  ds.seed = rng_seed;
  const std::uint64_t base = derive_seed(rng_seed, "dataset");

  // Whole shapes go to one split, so no complete shape appears in both.
  std::vector<Split> splits(specs.size(), Split::train);
  const auto n_test = static_cast<std::size_t>(
      std::floor(options.test_fraction * static_cast<double>(specs.size())));
  std::vector<std::size_t> order(specs.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng split_rng(derive_seed(base, "split"));
  std::shuffle(order.begin(), order.end(), split_rng);
  for (std::size_t i = 0; i < n_test; ++i) splits[order[i]] = Split::test;

  std::vector<ShapeOutput> outputs(specs.size());
  const auto jobs = static_cast<std::size_t>(std::max(options.jobs, 1));
  for (std::size_t start = 0; start < specs.size(); start += jobs) {
    std::vector<std::future<ShapeOutput>> batch;
    for (std::size_t i = start; i < std::min(specs.size(), start + jobs); ++i) {
      if (jobs == 1) {
        outputs[i] = generate_shape(specs[i], i, splits[i], options, base);
      } else {
        batch.push_back(std::async(std::launch::async, generate_shape, std::cref(specs[i]), i,
                                   splits[i], std::cref(options), base));
      }
    }
    for (std::size_t k = 0; k < batch.size(); ++k) outputs[start + k] = batch[k].get();
  }
  for (auto& o : outputs) {
    ds.shapes.push_back(std::move(o.shape));
    for (auto& p : o.pairs) ds.pairs.push_back(std::move(p));
  }
  return ds;
}

}  // namespace vrc
