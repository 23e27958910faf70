#pragma once

#include "vrc/geometry.hpp"

#include <map>
#include <memory>
#include <optional>

namespace vrc {

/// 26 camera directions: the normalized nonzero points of {-1,0,1}^3 under one
/// global rotation.
struct CameraPoseSet {
  Eigen::Matrix<double, 26, 3, Eigen::RowMajor> directions;
  Eigen::Matrix3d global_rotation = Eigen::Matrix3d::Identity();
  double radius = 2.0;

  Eigen::Vector3d position(int camera_id) const {
    return radius * directions.row(camera_id).transpose();
  }
};

/// Unrotated base layout, rows in lexicographic order of (x, y, z).
Eigen::Matrix<double, 26, 3, Eigen::RowMajor> base_camera_directions();
CameraPoseSet camera_poses_26(std::uint64_t rng_seed, double radius = 2.0);

/// Indices of points that are vertices of the convex hull (Quickhull).
/// Degenerate inputs (fewer than 4 points, coplanar) return every index.
std::vector<char> convex_hull_vertices(const Points& pts);

/// Hidden point removal by spherical flipping; `gamma` scales the flip radius
/// relative to the farthest point from the camera.
IndexList hidden_point_removal(const Points& cloud, const Eigen::Vector3d& camera,
                               double gamma = 10.0);

struct PartialView {
  Points points;
  IndexList source_indices;  // into the input cloud, in output order
  Eigen::Index candidate_count = 0;  // visible (render) or kept (crop) before FPS
};

struct UnderVisibilityError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Visible subset from `camera_position`, then farthest point sampling to
/// exactly `target_n` points.
PartialView render_partial(const Points& dense, const Eigen::Vector3d& camera_position,
                           Eigen::Index target_n, double gamma = 10.0);

/// Drops the floor(ratio * N) points farthest from the camera (ties: larger
/// index dropped first), then FPS to `target_n`.
PartialView crop_missing_ratio(const Points& complete, const Eigen::Vector3d& camera_position,
                               double missing_ratio, Eigen::Index target_n);

enum class DatasetMode { mvp, mvp40 };
std::string to_string(DatasetMode m);
DatasetMode dataset_mode_from_string(const std::string& s);

struct DatasetOptions {
  DatasetMode mode = DatasetMode::mvp;
  int divisor = 4;
  /// Ground-truth resolutions at full scale; divided by `divisor`.
  std::vector<Eigen::Index> base_resolutions{2048, 4096, 8192, 16384};
  Eigen::Index base_partial_resolution = 2048;
  double missing_ratio = 0.5;  // mvp40 only
  double test_fraction = 0.0;
  double camera_radius = 2.0;
  double hpr_gamma = 10.0;
  int jobs = 1;

  std::vector<Eigen::Index> resolutions() const;
  Eigen::Index partial_resolution() const { return base_partial_resolution / divisor; }
  void validate() const;
};

enum class Split { train, test };
std::string to_string(Split s);

struct ShapeSample {
  std::string shape_id;
  std::string category;
  ShapeSpec spec;
  Split split = Split::train;
  /// Unit-sphere normalized PDS ground truths keyed by resolution.
  std::map<Eigen::Index, std::shared_ptr<const Points>> complete;
};

struct DatasetPair {
  std::string pair_id;
  std::string shape_id;
  std::string category;
  int camera_id = 0;
  Split split = Split::train;
  std::optional<double> missing_ratio;
  Points partial;
  std::map<Eigen::Index, std::shared_ptr<const Points>> complete;
};

struct Dataset {
  DatasetOptions options;
  std::uint64_t seed = 0;
  std::vector<ShapeSample> shapes;
  std::vector<DatasetPair> pairs;
};

/// One PDS ground-truth set and 26 partial views per shape. Each shape and
/// view draws from its own seed stream, so output is independent of `jobs`.
Dataset build_dataset(const std::vector<ShapeSpec>& specs, const DatasetOptions& options,
                      std::uint64_t rng_seed);

}  // namespace vrc
