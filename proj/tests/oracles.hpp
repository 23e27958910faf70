#pragma once

#include "vrc/classifier.hpp"
#include "vrc/gradcheck.hpp"
#include "vrc/io.hpp"
#include "vrc/run_config.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

namespace test {

using vrc::Index;
using vrc::Points;

inline Points random_cloud(Index n, std::uint64_t seed, double half_width = 1.0) {
  vrc::Rng rng(seed);
  std::uniform_real_distribution<double> u(-half_width, half_width);
  Points p(n, 3);
  for (Index i = 0; i < n; ++i)
    for (int c = 0; c < 3; ++c) p(i, c) = u(rng);
  return p;
}

inline vrc::Tensor random_tensor(vrc::Shape shape, std::uint64_t seed, bool requires_grad = false) {
  vrc::Rng rng(seed);
  std::normal_distribution<double> n(0.0, 1.0);
  std::vector<double> v(static_cast<std::size_t>(vrc::numel(shape)));
  for (double& x : v) x = n(rng);
  return vrc::Tensor::from(std::move(shape), std::move(v), requires_grad);
}

inline std::vector<Index> random_permutation(Index n, std::uint64_t seed) {
  std::vector<Index> p(static_cast<std::size_t>(n));
  std::iota(p.begin(), p.end(), Index{0});
  vrc::Rng rng(seed);
  std::shuffle(p.begin(), p.end(), rng);
  return p;
}

// out.row(i) = in.row(perm[i])
inline Points permute_rows(const Points& in, const std::vector<Index>& perm) {
  Points out(in.rows(), 3);
  for (Index i = 0; i < in.rows(); ++i) out.row(i) = in.row(perm[static_cast<std::size_t>(i)]);
  return out;
}

inline vrc::Tensor permute_rows(const vrc::Tensor& t, const std::vector<Index>& perm) {
  vrc::NoGradGuard ng;
  return vrc::gather(t, perm).detach();
}

inline bool distinct_distances(const Points& p) {
  std::vector<double> d;
  for (Index i = 0; i < p.rows(); ++i)
    for (Index j = i + 1; j < p.rows(); ++j) d.push_back((p.row(i) - p.row(j)).squaredNorm());
  std::sort(d.begin(), d.end());
  return std::adjacent_find(d.begin(), d.end()) == d.end();
}

// ---- brute-force oracles ----

inline double sq_dist(const Points& a, Index i, const Points& b, Index j) {
  const double dx = a(i, 0) - b(j, 0), dy = a(i, 1) - b(j, 1), dz = a(i, 2) - b(j, 2);
  return dx * dx + dy * dy + dz * dz;
}

// Every pairwise distance, then per-row minima. Sums run in ascending order.
inline std::vector<double> all_nearest(const Points& a, const Points& b) {
  std::vector<double> out;
  for (Index i = 0; i < a.rows(); ++i) {
    std::vector<double> row;
    for (Index j = 0; j < b.rows(); ++j) row.push_back(sq_dist(a, i, b, j));
    out.push_back(*std::min_element(row.begin(), row.end()));
  }
  return out;
}

inline double sorted_mean(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

inline double oracle_chamfer(const Points& p, const Points& q) {
  return sorted_mean(all_nearest(p, q)) + sorted_mean(all_nearest(q, p));
}

inline vrc::FScore oracle_fscore(const Points& p, const Points& q, double tau) {
  auto frac = [tau](const std::vector<double>& d2) {
    long hits = 0;
    for (double d : d2) hits += std::sqrt(d) <= tau;
    return static_cast<double>(hits) / static_cast<double>(d2.size());
  };
  vrc::FScore f;
  f.precision = frac(all_nearest(p, q));
  f.recall = frac(all_nearest(q, p));
  f.f1 = f.precision + f.recall > 0 ? 2 * f.precision * f.recall / (f.precision + f.recall) : 0.0;
  return f;
}

inline double oracle_kl(const Eigen::VectorXd& mq, const Eigen::VectorXd& lq,
                        const Eigen::VectorXd& mp, const Eigen::VectorXd& lp) {
  double s = 0;
  for (Index d = 0; d < mq.size(); ++d) {
    const double vq = std::exp(lq[d]), vp = std::exp(lp[d]);
    s += 0.5 * ((vq + (mq[d] - mp[d]) * (mq[d] - mp[d])) / vp - 1.0 + std::log(vp / vq));
  }
  return s;
}

inline std::vector<Index> oracle_knn_row(const Points& cloud, const Eigen::RowVector3d& q, Index k) {
  std::vector<Index> idx(static_cast<std::size_t>(cloud.rows()));
  std::iota(idx.begin(), idx.end(), Index{0});
  std::vector<double> d(idx.size());
  for (Index j = 0; j < cloud.rows(); ++j) d[j] = (cloud.row(j) - q).squaredNorm();
  std::stable_sort(idx.begin(), idx.end(), [&](Index a, Index b) { return d[a] < d[b]; });
  idx.resize(static_cast<std::size_t>(k));
  return idx;
}

inline double max_abs_diff(const Eigen::Ref<const Eigen::VectorXd>& a,
                           const Eigen::Ref<const Eigen::VectorXd>& b) {
  return (a - b).cwiseAbs().maxCoeff();
}

inline bool bit_equal(const Eigen::Ref<const Eigen::VectorXd>& a,
                      const Eigen::Ref<const Eigen::VectorXd>& b) {
  return a.size() == b.size() && std::equal(a.data(), a.data() + a.size(), b.data());
}

inline bool bit_equal_points(const Points& a, const Points& b) {
  return a.rows() == b.rows() && std::equal(a.data(), a.data() + a.size(), b.data());
}

// Parameters drawn away from zero so ReLU kinks are not hit exactly.
inline void randomize_params(vrc::ParamRegistry& reg, std::uint64_t seed, double half_width = 0.6) {
  vrc::Rng rng(seed);
  std::uniform_real_distribution<double> u(-half_width, half_width);
  for (auto& [path, p] : reg.entries()) {
    auto& v = reg.get(path).mutable_values();
    for (Index i = 0; i < v.size(); ++i) v[i] = u(rng);
  }
}

// Scalar loss sum(w * t) with fixed random weights w.
inline vrc::Tensor probe(const vrc::Tensor& t, std::uint64_t seed) {
  return vrc::sum(vrc::mul(t, random_tensor(t.shape(), seed)));
}

}  // namespace test
