#include "vrc/classifier.hpp"
#include "vrc/gradcheck.hpp"
#include "vrc/renet.hpp"

#include <algorithm>

namespace vrc {

namespace {

Tensor random_tensor(Shape shape, Rng& rng, double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  Eigen::VectorXd v(numel(shape));
  for (Index i = 0; i < v.size(); ++i) v[i] = u(rng);
  return Tensor::from(std::move(shape), v, true);
}

Points random_points(Index n, Rng& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Points p(n, 3);
  for (Index i = 0; i < p.size(); ++i) p.data()[i] = u(rng);
  return p;
}

// Scalar probe <out, w> with fixed random w, so no output entry cancels.
class Probe {
 public:
  explicit Probe(Rng& rng) : rng_(rng) {}
  Tensor operator()(const Tensor& out) {
    if (!w_.defined() || w_.shape() != out.shape()) {
      std::uniform_real_distribution<double> u(0.5, 1.5);
      Eigen::VectorXd v(out.size());
      for (Index i = 0; i < v.size(); ++i) v[i] = u(rng_);
      w_ = Tensor::from(out.shape(), v);
    }
    return sum(mul(out, w_));
  }

 private:
  Rng& rng_;
  Tensor w_;
};

// Parameters redrawn at a generic point: zero biases put ReLU inputs exactly
// on the kink whenever a row of the layer input is zero.
std::vector<Tensor> params_of(ParamRegistry& reg, Rng& rng) {
  std::uniform_real_distribution<double> u(-0.6, 0.6);
  std::vector<Tensor> out;
  for (const auto& [path, p] : reg.entries()) {
    Tensor t = reg.get(path);
    for (Index i = 0; i < t.size(); ++i) t.mutable_values()[i] = u(rng);
    out.push_back(t);
  }
  return out;
}

std::vector<Tensor> join(std::vector<Tensor> a, const std::vector<Tensor>& b) {
  a.insert(a.end(), b.begin(), b.end());
  return a;
}

struct Suite {
  std::string filter;
  std::uint64_t seed;
  std::vector<GradCheckEntry> out;

  bool wants(const std::string& module) const { return filter.empty() || filter == module; }

  void check(const std::string& module, const std::string& name, const GraphBuilder& build,
             const std::vector<Tensor>& inputs) {
    out.push_back({module, name, grad_check(build, inputs)});
  }

  void tensor_ops() {
    Rng rng(derive_seed(seed, "tensor"));
    Probe probe(rng);
    auto unary = [&](const std::string& name, auto op, double lo = -1.0, double hi = 1.0) {
      check("tensor", name, [&](const std::vector<Tensor>& in) { return probe(op(in[0])); },
            {random_tensor({4, 5}, rng, lo, hi)});
    };
    check("tensor", "linear",
          [&](const std::vector<Tensor>& in) { return probe(linear(in[0], in[1], in[2])); },
          {random_tensor({6, 4}, rng), random_tensor({4, 3}, rng), random_tensor({3}, rng)});
    check("tensor", "linear_nobias",
          [&](const std::vector<Tensor>& in) { return probe(linear(in[0], in[1])); },
          {random_tensor({5, 2}, rng), random_tensor({2, 4}, rng)});
    unary("relu", [](const Tensor& x) { return relu(x); });
    unary("exp", [](const Tensor& x) { return exp(x); });
    unary("log", [](const Tensor& x) { return log(x); }, 0.2, 2.0);
    unary("square", [](const Tensor& x) { return square(x); });
    unary("reciprocal", [](const Tensor& x) { return reciprocal(x); }, 0.3, 2.0);
    unary("clamp", [](const Tensor& x) { return clamp(x, -0.5, 0.5); });
    unary("scale", [](const Tensor& x) { return scale(x, -1.7); });
    unary("add_scalar", [](const Tensor& x) { return add_scalar(x, 0.3); });
    unary("sum", [](const Tensor& x) { return sum(x); });
    unary("mean", [](const Tensor& x) { return mean(x); });
    unary("reshape", [](const Tensor& x) { return reshape(x, {2, 10}); });
    unary("slice", [](const Tensor& x) { return slice(x, 1, 1, 4); });
    unary("tile", [](const Tensor& x) { return tile(x, 0, 3); });
    for (Index axis : {0, 1}) {
      const std::string a = std::to_string(axis);
      unary("softmax_" + a, [axis](const Tensor& x) { return softmax(x, axis); });
      unary("log_softmax_" + a, [axis](const Tensor& x) { return log_softmax(x, axis); });
      unary("mean_reduce_" + a, [axis](const Tensor& x) { return mean_reduce(x, axis); });
      unary("sum_reduce_" + a, [axis](const Tensor& x) { return sum_reduce(x, axis); });
      unary("max_reduce_" + a, [axis](const Tensor& x) { return max_reduce(x, axis); });
    }
    check("tensor", "max_reduce_rank3",
          [&](const std::vector<Tensor>& in) { return probe(max_reduce(in[0], 1)); },
          {random_tensor({3, 4, 2}, rng)});
    for (const char* op : {"add", "sub", "mul"}) {
      const std::string name = op;
      check("tensor", name,
            [&, name](const std::vector<Tensor>& in) {
              if (name == "add") return probe(add(in[0], in[1]));
              if (name == "sub") return probe(sub(in[0], in[1]));
              return probe(mul(in[0], in[1]));
            },
            {random_tensor({3, 4}, rng), random_tensor({3, 4}, rng)});
    }
    check("tensor", "concat",
          [&](const std::vector<Tensor>& in) { return probe(concat({in[0], in[1]}, 1)); },
          {random_tensor({3, 2}, rng), random_tensor({3, 4}, rng)});
    const IndexList idx{2, 0, 2, 1, 3};
    check("tensor", "gather",
          [&](const std::vector<Tensor>& in) { return probe(gather(in[0], idx)); },
          {random_tensor({4, 3}, rng)});
  }

  void metric_ops() {
    Rng rng(derive_seed(seed, "metrics"));
    check("metrics", "chamfer",
          [](const std::vector<Tensor>& in) { return chamfer_distance(in[0], in[1]); },
          {random_tensor({12, 3}, rng), random_tensor({9, 3}, rng)});
    check("metrics", "gaussian_kl",
          [](const std::vector<Tensor>& in) { return gaussian_kl(in[0], in[1], in[2], in[3]); },
          {random_tensor({1, 5}, rng), random_tensor({1, 5}, rng), random_tensor({1, 5}, rng),
           random_tensor({1, 5}, rng)});
    check("metrics", "cross_entropy",
          [](const std::vector<Tensor>& in) { return cross_entropy(in[0], 2); },
          {random_tensor({1, 4}, rng)});
  }

  void kernel_ops() {
    for (std::uint64_t trial = 0; trial < 5; ++trial) {
      Rng rng(derive_seed(derive_seed(seed, "kernels"), trial));
      Probe probe(rng);
      const std::string t = "_seed" + std::to_string(trial);
      {
        ParamRegistry reg;
        const PSAConfig cfg{4, 5, 3, 4};
        add_psa(reg, "psa", cfg, rng);
        const Points p = random_points(16, rng);
        const NeighborTable nbr = knn(p, p, cfg.k);
        check("kernels", "psa" + t,
              [&](const std::vector<Tensor>& in) { return probe(psa_forward(reg, "psa", cfg, in[0], nbr)); },
              join({random_tensor({16, 5}, rng)}, params_of(reg, rng)));
      }
      {
        ParamRegistry reg;
        const PSKConfig cfg{{2, 4}, 6, 6, 3};
        add_psk(reg, "psk", cfg, rng);
        const Points p = random_points(8, rng);
        check("kernels", "psk" + t,
              [&](const std::vector<Tensor>& in) { return probe(psk_forward(reg, "psk", cfg, in[0], p).out); },
              join({random_tensor({8, 6}, rng)}, params_of(reg, rng)));
      }
      {
        ParamRegistry reg;
        const PSKConfig cfg{{2, 3}, 4, 5, 3};
        add_rpsk(reg, "rpsk", cfg, rng);
        const Points p = random_points(8, rng);
        check("kernels", "rpsk" + t,
              [&](const std::vector<Tensor>& in) { return probe(rpsk_forward(reg, "rpsk", cfg, in[0], p)); },
              join({random_tensor({8, 4}, rng)}, params_of(reg, rng)));
      }
      {
        const Points p = random_points(16, rng);
        check("kernels", "ep_pool" + t,
              [&](const std::vector<Tensor>& in) { return probe(ep_pool(in[0], p, 0.25, 4).features); },
              {random_tensor({16, 3}, rng)});
      }
      {
        check("kernels", "eu_unpool" + t,
              [&](const std::vector<Tensor>& in) { return probe(eu_unpool(in[0], in[1], in[2], in[3])); },
              {random_tensor({5, 3}, rng), random_tensor({5, 3}, rng), random_tensor({12, 3}, rng),
               random_tensor({12, 2}, rng)});
      }
      {
        ParamRegistry reg;
        const EFEConfig cfg{4, 3, 5, 3};
        add_efe(reg, "efe", cfg, rng, 1.0);
        check("kernels", "efe" + t,
              [&](const std::vector<Tensor>& in) {
                const EFEResult r = efe_expand(reg, "efe", cfg, in[0], in[1]);
                return add(probe(r.coords), sum(r.features));
              },
              join({random_tensor({6, 4}, rng), random_tensor({6, 3}, rng)}, params_of(reg, rng)));
      }
    }
  }

  static PMNetConfig toy_pmnet() {
    PMNetConfig cfg;
    cfg.latent = 3;
    cfg.feature = 6;
    cfg.coarse_n = 5;
    cfg.stage1 = {4, 5};
    cfg.stage2 = {6};
    cfg.decoder_hidden = 7;
    return cfg;
  }

  void pmnet_ops() {
    Rng rng(derive_seed(seed, "pmnet"));
    const PMNetConfig cfg = toy_pmnet();
    ParamRegistry reg;
    add_pmnet(reg, "pm", cfg, rng);
    for (LatentPath path : {LatentPath::reconstruction, LatentPath::completion}) {
      const std::string name = path == LatentPath::reconstruction ? "encoder_rec_kl" : "encoder_com_kl";
      check("pmnet", name,
            [&, path](const std::vector<Tensor>& in) {
              const Encoding e = encode(reg, "pm", cfg, in[0], path);
              const Tensor zero = Tensor::zeros(e.mu.shape());
              return add(gaussian_kl(e.mu, e.logvar, zero, zero), sum(e.feature));
            },
            join({random_tensor({10, 3}, rng)}, params_of(reg, rng)));
    }
    const Tensor gt = Tensor::from_matrix(random_points(9, rng));
    check("pmnet", "decoder_cd",
          [&](const std::vector<Tensor>& in) {
            return chamfer_distance(decode_coarse(reg, "pm", cfg, in[0], in[1]), gt);
          },
          join({random_tensor({1, cfg.latent}, rng), random_tensor({1, cfg.feature}, rng)}, params_of(reg, rng)));
    check("pmnet", "reparameterize",
          [&](const std::vector<Tensor>& in) { return sum(square(reparameterize(in[0], in[1], 11))); },
          {random_tensor({1, 4}, rng), random_tensor({1, 4}, rng)});
    const Tensor partial = random_tensor({8, 3}, rng);
    const Tensor complete = random_tensor({10, 3}, rng);
    check("pmnet", "losses",
          [&](const std::vector<Tensor>& in) {
            const PMNetLosses l = pmnet_losses(reg, "pm", cfg, in[0], in[1], 5);
            return add(add(l.kl_rec, l.cd_rec), l.cd_com);
          },
          join({partial, complete}, params_of(reg, rng)));
    // The link term does not propagate into the reconstruction posterior, so it
    // is checked only against inputs that posterior does not depend on.
    std::vector<Tensor> link{partial};
    for (const char* head : {"pm.head_com.mu.weight", "pm.head_com.mu.bias",
                             "pm.head_com.logvar.weight", "pm.head_com.logvar.bias"}) {
      link.push_back(reg.get(head));
    }
    check("pmnet", "kl_link",
          [&](const std::vector<Tensor>& in) {
            return pmnet_losses(reg, "pm", cfg, in[0], complete, 5).kl_com;
          },
          link);
  }

  void renet_ops() {
    Rng rng(derive_seed(seed, "renet"));
    RENetConfig cfg;
    cfg.channels = {4, 5, 6};
    cfg.pool_ratios = {0.5, 0.5};
    cfg.pool_k = {2, 2};
    cfg.branch_ks = {2, 3};
    cfg.c_mid = 3;
    cfg.code_width = 3;
    cfg.up_ratio = 2;
    // Output count equals the expanded count so the final FPS keeps every
    // point; a subset selection would flip under the finite-difference step.
    cfg.output_n = 64;
    ParamRegistry reg;
    add_renet(reg, "re", cfg, rng);
    const Tensor gt = Tensor::from_matrix(random_points(32, rng));
    const Tensor x = random_tensor({16, 3}, rng);
    const Tensor yc = random_tensor({16, 3}, rng);
    check("renet", "renet_cd",
          [&](const std::vector<Tensor>& in) {
            return chamfer_distance(renet_forward(reg, "re", cfg, in[0], in[1]).fine, gt);
          },
          join({x, yc}, params_of(reg, rng)));
  }

  void classifier_ops() {
    Rng rng(derive_seed(seed, "classifier"));
    ClassifierConfig cfg;
    cfg.trunk = {4, 6};
    cfg.head_hidden = 5;
    cfg.categories = {"a", "b", "c"};
    ParamRegistry reg;
    add_classifier(reg, cfg, rng);
    check("classifier", "classifier_ce",
          [&](const std::vector<Tensor>& in) { return cross_entropy(classify(reg, cfg, in[0]), 1); },
          join({random_tensor({10, 3}, rng)}, params_of(reg, rng)));
  }
};

}  // namespace

std::vector<std::string> gradcheck_modules() {
  return {"tensor", "metrics", "kernels", "pmnet", "renet", "classifier"};
}

std::vector<GradCheckEntry> run_gradcheck_suite(const std::string& module, std::uint64_t seed) {
  const auto mods = gradcheck_modules();
  if (!module.empty() && std::find(mods.begin(), mods.end(), module) == mods.end()) {
    throw std::invalid_argument("gradcheck: unknown module '" + module + "'");
  }
  Suite s{module, seed, {}};
  if (s.wants("tensor")) s.tensor_ops();
  if (s.wants("metrics")) s.metric_ops();
  if (s.wants("kernels")) s.kernel_ops();
  if (s.wants("pmnet")) s.pmnet_ops();
  if (s.wants("renet")) s.renet_ops();
  if (s.wants("classifier")) s.classifier_ops();
  return s.out;
}

}  // namespace vrc
