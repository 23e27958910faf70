#include "vrc/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

namespace vrc {

using Eigen::Index;

namespace {

struct Match {
  std::vector<double> d2;
  std::vector<Index> arg;
};

// Nearest q for every row of p; ties keep the smaller index.
Match nearest(const double* p, Index np, const double* q, Index nq) {
  Match m;
  m.d2.resize(static_cast<std::size_t>(np));
  m.arg.resize(static_cast<std::size_t>(np));
  for (Index i = 0; i < np; ++i) {
    const double x = p[3 * i], y = p[3 * i + 1], z = p[3 * i + 2];
    double best = std::numeric_limits<double>::infinity();
    Index arg = 0;
    for (Index j = 0; j < nq; ++j) {
      const double dx = x - q[3 * j], dy = y - q[3 * j + 1], dz = z - q[3 * j + 2];
      const double d = dx * dx + dy * dy + dz * dz;
      if (d < best) {
        best = d;
        arg = j;
      }
    }
    m.d2[i] = best;
    m.arg[i] = arg;
  }
  return m;
}

// Ascending-order sum: invariant to the order of the points.
double mean_of(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

void require_cloud_tensor(const Tensor& t, const char* name) {
  if (t.rank() != 2 || t.dim(1) != 3) {
    throw ShapeError(std::string("chamfer_distance: ") + name + " must be [N, 3], got " +
                     to_string(t.shape()));
  }
  if (t.dim(0) == 0) throw std::invalid_argument("chamfer_distance: empty point cloud");
}

}  // namespace

double chamfer_distance(const Points& p, const Points& q) {
  require_nonempty(p, "chamfer_distance");
  require_nonempty(q, "chamfer_distance");
  const Match pq = nearest(p.data(), p.rows(), q.data(), q.rows());
  const Match qp = nearest(q.data(), q.rows(), p.data(), p.rows());
  return mean_of(pq.d2) + mean_of(qp.d2);
}

Tensor chamfer_distance(const Tensor& p, const Tensor& q) {
  require_cloud_tensor(p, "P");
  require_cloud_tensor(q, "Q");
  const Index np = p.dim(0), nq = q.dim(0);
  auto pq = std::make_shared<Match>(nearest(p.values().data(), np, q.values().data(), nq));
  auto qp = std::make_shared<Match>(nearest(q.values().data(), nq, p.values().data(), np));
  Eigen::VectorXd value(1);
  value[0] = mean_of(pq->d2) + mean_of(qp->d2);
  return make_result(
      "chamfer", {1}, std::move(value), {p, q},
      [p, q, pq, qp, np, nq](const Eigen::VectorXd& g, std::span<Eigen::VectorXd*> gin) {
        const auto& pv = p.values();
        const auto& qv = q.values();
        const double sp = 2.0 * g[0] / static_cast<double>(np);
        const double sq = 2.0 * g[0] / static_cast<double>(nq);
        for (Index i = 0; i < np; ++i) {
          const Index j = pq->arg[i];
          for (int c = 0; c < 3; ++c) {
            const double d = sp * (pv[3 * i + c] - qv[3 * j + c]);
            if (gin[0]) (*gin[0])[3 * i + c] += d;
            if (gin[1]) (*gin[1])[3 * j + c] -= d;
          }
        }
        for (Index j = 0; j < nq; ++j) {
          const Index i = qp->arg[j];
          for (int c = 0; c < 3; ++c) {
            const double d = sq * (qv[3 * j + c] - pv[3 * i + c]);
            if (gin[1]) (*gin[1])[3 * j + c] += d;
            if (gin[0]) (*gin[0])[3 * i + c] -= d;
          }
        }
      });
}

FScore fscore(const Points& pred, const Points& gt, double tau) {
  require_nonempty(pred, "fscore");
  require_nonempty(gt, "fscore");
  if (!(tau > 0.0)) throw std::invalid_argument("fscore: tau must be positive");
  const Match pg = nearest(pred.data(), pred.rows(), gt.data(), gt.rows());
  const Match gp = nearest(gt.data(), gt.rows(), pred.data(), pred.rows());
  auto within = [tau](const Match& m) {
    Index hits = 0;
    for (double d2 : m.d2) hits += std::sqrt(d2) <= tau ? 1 : 0;
    return static_cast<double>(hits) / static_cast<double>(m.d2.size());
  };
  FScore f;
  f.precision = within(pg);
  f.recall = within(gp);
  const double s = f.precision + f.recall;
  f.f1 = s > 0.0 ? 2.0 * f.precision * f.recall / s : 0.0;
  return f;
}

double gaussian_kl(const LatentDistribution& q, const LatentDistribution& p) {
  if (q.mu.size() != p.mu.size() || q.logvar.size() != q.mu.size() ||
      p.logvar.size() != p.mu.size()) {
    throw ShapeError("gaussian_kl: latent dimension mismatch");
  }
  // var_q / var_p as exp(lq - lp) so that q = p gives exactly zero
  const Eigen::ArrayXd log_ratio = (q.logvar - p.logvar).array();
  const Eigen::ArrayXd diff = (q.mu - p.mu).array();
  const Eigen::ArrayXd terms =
      log_ratio.exp() + diff.square() * (-p.logvar.array()).exp() - 1.0 - log_ratio;
  return 0.5 * terms.sum();
}

Tensor gaussian_kl(const Tensor& mu_q, const Tensor& logvar_q, const Tensor& mu_p,
                   const Tensor& logvar_p) {
  if (mu_q.shape() != logvar_q.shape() || mu_q.shape() != mu_p.shape() ||
      mu_q.shape() != logvar_p.shape()) {
    throw ShapeError("gaussian_kl: latent dimension mismatch " + to_string(mu_q.shape()) +
                     " vs " + to_string(mu_p.shape()));
  }
  const Tensor log_ratio = sub(logvar_q, logvar_p);
  const Tensor mean_term = mul(square(sub(mu_q, mu_p)), exp(scale(logvar_p, -1.0)));
  const Tensor terms = sub(add_scalar(add(exp(log_ratio), mean_term), -1.0), log_ratio);
  return scale(sum(terms), 0.5);
}

ClassificationScore classification_metrics(const std::vector<std::string>& predicted,
                                           const std::vector<std::string>& truth,
                                           const std::vector<std::string>& categories) {
  if (predicted.size() != truth.size()) {
    throw std::invalid_argument("classification_metrics: " + std::to_string(predicted.size()) +
                                " predictions for " + std::to_string(truth.size()) + " labels");
  }
  if (truth.empty()) throw std::invalid_argument("classification_metrics: no samples");
  const std::set<std::string> known(categories.begin(), categories.end());
  std::map<std::string, std::pair<long, long>> tally;  // correct, total
  long correct = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    for (const auto* label : {&predicted[i], &truth[i]}) {
      if (!known.count(*label)) {
        throw std::invalid_argument("classification_metrics: unknown label '" + *label + "'");
      }
    }
    const bool hit = predicted[i] == truth[i];
    correct += hit;
    auto& t = tally[truth[i]];
    t.first += hit;
    ++t.second;
  }
  ClassificationScore s;
  s.acc = static_cast<double>(correct) / static_cast<double>(truth.size());
  double total = 0.0;
  for (const auto& [cat, t] : tally) {
    const double a = static_cast<double>(t.first) / static_cast<double>(t.second);
    s.per_category[cat] = a;
    total += a;
  }
  s.avg = total / static_cast<double>(tally.size());
  return s;
}

nlohmann::ordered_json to_json(const MetricReport& r) {
  nlohmann::ordered_json j;
  j["cd"] = r.cd;
  j["cd_x1e4"] = r.cd * kCdDisplayScale;
  j["fscore"] = r.fscore;
  j["precision"] = r.precision;
  j["recall"] = r.recall;
  nlohmann::ordered_json cats = nlohmann::ordered_json::object();
  for (const auto& [name, c] : r.per_category) {
    cats[name] = {{"cd", c.cd}, {"cd_x1e4", c.cd * kCdDisplayScale}, {"fscore", c.fscore},
                  {"count", c.count}};
  }
  j["per_category"] = std::move(cats);
  return j;
}

MetricReport metric_report_from_json(const nlohmann::json& j) {
  MetricReport r;
  r.cd = j.at("cd").get<double>();
  r.fscore = j.at("fscore").get<double>();
  r.precision = j.at("precision").get<double>();
  r.recall = j.at("recall").get<double>();
  for (const auto& [name, c] : j.at("per_category").items()) {
    r.per_category[name] = {c.at("cd").get<double>(), c.at("fscore").get<double>(),
                            c.at("count").get<long>()};
  }
  return r;
}

}  // namespace vrc
