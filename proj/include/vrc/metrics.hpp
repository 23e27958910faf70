#pragma once

#include "vrc/geometry.hpp"
#include "vrc/tensor.hpp"

#include <json.hpp>

#include <map>
#include <string>
#include <vector>

namespace vrc {

/// Symmetric Chamfer distance with squared Euclidean norms:
/// mean_x min_y |x-y|^2 + mean_y min_x |x-y|^2.
double chamfer_distance(const Points& p, const Points& q);

/// Differentiable Chamfer distance between [N,3] and [M,3] tensors. The
/// gradient flows through the nearest-neighbour matches (ties: smaller index).
Tensor chamfer_distance(const Tensor& p, const Tensor& q);

struct FScore {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

/// Precision: fraction of `pred` within `tau` (unsquared) of some `gt` point;
/// recall symmetric.
FScore fscore(const Points& pred, const Points& gt, double tau = 0.01);

struct LatentDistribution {
  Eigen::VectorXd mu;
  Eigen::VectorXd logvar;
};

/// KL[q || p] between diagonal Gaussians.
double gaussian_kl(const LatentDistribution& q, const LatentDistribution& p);

/// Differentiable KL[q || p]; inputs are [D] or [1, D] tensors.
Tensor gaussian_kl(const Tensor& mu_q, const Tensor& logvar_q, const Tensor& mu_p,
                   const Tensor& logvar_p);

struct ClassificationScore {
  double acc = 0.0;  // overall fraction correct
  double avg = 0.0;  // unweighted mean of per-category accuracies
  std::map<std::string, double> per_category;
};

ClassificationScore classification_metrics(const std::vector<std::string>& predicted,
                                           const std::vector<std::string>& truth,
                                           const std::vector<std::string>& categories);

struct CategoryStats {
  double cd = 0.0;
  double fscore = 0.0;
  long count = 0;
};

struct MetricReport {
  double cd = 0.0;  // unscaled; presented x1e4
  double fscore = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  std::map<std::string, CategoryStats> per_category;
};

constexpr double kCdDisplayScale = 1e4;

nlohmann::ordered_json to_json(const MetricReport& r);
MetricReport metric_report_from_json(const nlohmann::json& j);

}  // namespace vrc
