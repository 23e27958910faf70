#include "support.hpp"

#include <sstream>

using namespace vrc;

namespace {

Tensor scalar_leaf(double v) { return Tensor::scalar(v, true); }

LossParts unit_parts() {
  return {scalar_leaf(1), scalar_leaf(1), scalar_leaf(1), scalar_leaf(1), scalar_leaf(1)};
}

std::vector<DatasetPair> first_pairs(const Dataset& ds, std::size_t n) {
  return {ds.pairs.begin(), ds.pairs.begin() + static_cast<std::ptrdiff_t>(n)};
}

// Pair whose ground truth at `res` is `gt`.
DatasetPair handmade_pair(const std::string& id, const std::string& category, const Points& gt,
                          Index res) {
  DatasetPair p;
  p.pair_id = id;
  p.shape_id = id;
  p.category = category;
  p.partial = gt.topRows(1);
  p.complete[res] = std::make_shared<const Points>(gt);
  return p;
}

}  // namespace

TEST_SUITE("training") {

TEST_CASE("joint_loss with unit weights is the plain sum") {
  LossWeights w;
  w.kl_lambda = 1.0;
  const LossParts p{scalar_leaf(0.125), scalar_leaf(0.5), scalar_leaf(0.25), scalar_leaf(2.0),
                    scalar_leaf(4.0)};
  CHECK(joint_loss(p, w).item() == ((0.125 + 0.5) + (0.25 + 2.0)) + 4.0);
}

TEST_CASE("joint_loss weights (1, 2, 4) over unit parts give 10") {
  LossWeights w;
  w.lambda_rec = 1;
  w.lambda_com = 2;
  w.lambda_fine = 4;
  w.kl_lambda = 1;
  CHECK(joint_loss(unit_parts(), w).item() == 10.0);
}

TEST_CASE("joint_loss matches the weighted formula bit for bit") {
  Rng rng(11);
  std::uniform_real_distribution<double> u(0.0, 3.0);
  for (int trial = 0; trial < 20; ++trial) {
    LossWeights w{u(rng), u(rng), u(rng), u(rng)};
    const double a = u(rng), b = u(rng), c = u(rng), d = u(rng), e = u(rng);
    const double expect = (w.lambda_rec * (w.kl_lambda * a + b) +
                           w.lambda_com * (w.kl_lambda * c + d)) + w.lambda_fine * e;
    const LossParts p{scalar_leaf(a), scalar_leaf(b), scalar_leaf(c), scalar_leaf(d), scalar_leaf(e)};
    CHECK(joint_loss(p, w).item() == expect);
  }
}

TEST_CASE("joint_loss rejects negative weights and non-scalar parts") {
  LossWeights w;
  w.lambda_com = -1;
  CHECK_THROWS_AS(joint_loss(unit_parts(), w), std::invalid_argument);
  LossParts p = unit_parts();
  p.cd_fine = Tensor::zeros({2});
  CHECK_THROWS_AS(joint_loss(p, LossWeights{}), ShapeError);
}

TEST_CASE("lambda_fine = 0 leaves RENet parameters without gradient") {
  const VRCNetConfig cfg = test::tiny_vrcnet();
  ParamRegistry reg;
  Rng rng(4);
  add_vrcnet(reg, cfg, rng);
  test::randomize_params(reg, 5);
  const Dataset ds = test::tiny_dataset({ShapeFamily::box});
  const auto& pair = ds.pairs[0];
  const VRCNetLosses l = vrcnet_losses(reg, cfg, pair.partial, *pair.complete.at(64), 9);
  LossWeights w;
  w.lambda_fine = 0.0;
  const GradientMap g =
      reg.gradients(backward(joint_loss({l.kl_rec, l.cd_rec, l.kl_com, l.cd_com, l.cd_fine}, w)));
  bool any_pmnet = false;
  for (const auto& [path, grad] : g) {
    if (path.rfind("renet.", 0) == 0) {
      CHECK_MESSAGE(grad.isZero(0.0), path);
    } else {
      any_pmnet = any_pmnet || !grad.isZero(0.0);
    }
  }
  CHECK(any_pmnet);
}

TEST_CASE("fit is bit-reproducible for a fixed seed") {
  const VRCNetConfig cfg = test::tiny_vrcnet();
  const Dataset ds = test::tiny_dataset({ShapeFamily::box});
  const auto pairs = first_pairs(ds, 6);
  TrainConfig tc;
  tc.batch_size = 2;
  tc.epochs = 3;
  tc.base_lr = 1e-3;
  tc.seed = 17;
  auto run = [&] {
    ParamRegistry reg;
    Rng rng(1);
    add_vrcnet(reg, cfg, rng);
    return fit(reg, cfg, pairs, tc, LossWeights{});
  };
  const auto a = run();
  const auto b = run();
  REQUIRE(a.size() == 9);
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].total == b[i].total);
    CHECK(a[i].cd_fine == b[i].cd_fine);
    CHECK(a[i].kl_com == b[i].kl_com);
  }
}

TEST_CASE("fit rejects an empty dataset") {
  const VRCNetConfig cfg = test::tiny_vrcnet();
  ParamRegistry reg;
  Rng rng(1);
  add_vrcnet(reg, cfg, rng);
  CHECK_THROWS_AS(fit(reg, cfg, {}, TrainConfig{}, LossWeights{}), std::invalid_argument);
}

TEST_CASE("fit rejects pairs without ground truth at the output size") {
  VRCNetConfig cfg = test::tiny_vrcnet();
  cfg.renet.output_n = 100;
  ParamRegistry reg;
  Rng rng(1);
  add_vrcnet(reg, cfg, rng);
  const Dataset ds = test::tiny_dataset({ShapeFamily::box});
  CHECK_THROWS_WITH_AS(fit(reg, cfg, first_pairs(ds, 1), TrainConfig{}, LossWeights{}),
                       doctest::Contains("box_0000_v00"), std::invalid_argument);
}

TEST_CASE("learning rate follows the per-epoch schedule") {
  const VRCNetConfig cfg = test::tiny_vrcnet();
  const Dataset ds = test::tiny_dataset({ShapeFamily::sphere});
  ParamRegistry reg;
  Rng rng(1);
  add_vrcnet(reg, cfg, rng);
  TrainConfig tc;
  tc.batch_size = 2;
  tc.epochs = 7;
  tc.base_lr = 1e-3;
  tc.decay = 0.7;
  tc.decay_interval = 3;
  const auto trace = fit(reg, cfg, first_pairs(ds, 4), tc, LossWeights{});
  REQUIRE(trace.size() == 14);
  for (const auto& r : trace) {
    CHECK(r.epoch == r.step / 2);
    CHECK(r.lr == lr_schedule(r.epoch, 1e-3, 0.7, 3));
  }
  CHECK(trace.back().lr == 1e-3 * 0.7 * 0.7);
}

TEST_CASE("max_steps caps training and the log has one JSON line per step") {
  const VRCNetConfig cfg = test::tiny_vrcnet();
  const Dataset ds = test::tiny_dataset({ShapeFamily::sphere});
  ParamRegistry reg;
  Rng rng(1);
  add_vrcnet(reg, cfg, rng);
  TrainConfig tc;
  tc.batch_size = 1;
  tc.max_steps = 5;
  std::ostringstream log;
  const auto trace = fit(reg, cfg, first_pairs(ds, 3), tc, LossWeights{}, &log);
  REQUIRE(trace.size() == 5);
  std::istringstream in(log.str());
  std::string line;
  int n = 0;
  while (std::getline(in, line)) {
    const auto j = nlohmann::json::parse(line);
    for (const char* key : {"step", "epoch", "lr", "kl_rec", "cd_rec", "kl_com", "cd_com",
                            "cd_fine", "total"}) {
      CHECK_MESSAGE(j.contains(key), key);
    }
    CHECK(j["step"] == n);
    CHECK(j["cd_fine"].get<double>() == trace[static_cast<std::size_t>(n)].cd_fine);
    ++n;
  }
  CHECK(n == 5);
}

TEST_CASE("checkpoints land every k epochs plus a final one") {
  const VRCNetConfig cfg = test::tiny_vrcnet();
  const Dataset ds = test::tiny_dataset({ShapeFamily::sphere});
  ParamRegistry reg;
  Rng rng(1);
  add_vrcnet(reg, cfg, rng);
  TrainConfig tc;
  tc.batch_size = 2;
  tc.epochs = 4;
  tc.checkpoint_every = 2;
  tc.out_dir = test::scratch_dir("fit_ckpt");
  fit(reg, cfg, first_pairs(ds, 2), tc, LossWeights{});
  for (const char* name : {"epoch_0002", "epoch_0004", "final"}) {
    CHECK_MESSAGE(std::filesystem::exists(tc.out_dir / (std::string(name) + ".idx.json")), name);
  }
  CHECK_FALSE(std::filesystem::exists(tc.out_dir / "epoch_0001.idx.json"));
  const LoadedModel back = load_model(tc.out_dir / "final");
  for (const auto& [path, p] : reg.entries()) {
    CHECK(test::bit_equal(back.params.get(path).values(), p.value.values()));
  }
}

TEST_CASE("overfitting one pair cuts cd_fine at least tenfold") {
  const VRCNetConfig cfg = test::tiny_vrcnet();
  const Dataset ds = test::tiny_dataset({ShapeFamily::box});
  ParamRegistry reg;
  Rng rng(2);
  add_vrcnet(reg, cfg, rng);
  TrainConfig tc;
  tc.batch_size = 1;
  tc.epochs = 2000;
  tc.base_lr = 1e-3;
  tc.decay = 1.0;
  const auto trace = fit(reg, cfg, first_pairs(ds, 1), tc, LossWeights{});
  REQUIRE(trace.size() == 2000);
  const double early = trace[10].cd_fine;
  const double late = trace.back().cd_fine;
  MESSAGE("cd_fine step 10: " << early << ", final: " << late);
  CHECK(late * 10.0 <= early);
}

TEST_CASE("evaluate with an oracle completer gives CD 0 and F1 1") {
  const Dataset ds = test::tiny_dataset({ShapeFamily::box, ShapeFamily::lamp});
  std::vector<DatasetPair> pairs{ds.pairs[0], ds.pairs[5], ds.pairs[26], ds.pairs[40]};
  const Completer oracle = [](const DatasetPair& p, Index res) { return *p.complete.at(res); };
  const auto reports = evaluate(oracle, pairs, {64, 128, 256, 512});
  REQUIRE(reports.size() == 4);
  for (const auto& [res, r] : reports) {
    CHECK(r.cd == 0.0);
    CHECK(r.fscore == 1.0);
    CHECK(r.precision == 1.0);
    CHECK(r.recall == 1.0);
    REQUIRE(r.per_category.size() == 2);
    CHECK(r.per_category.at("box").count == 2);
    CHECK(r.per_category.at("lamp").fscore == 1.0);
  }
}

TEST_CASE("evaluate averages are unweighted means over categories") {
  // Category a: three pairs at CD 2 each. Category b: one pair at CD 8.
  Points origin = Points::Zero(1, 3);
  Points unit(1, 3);
  unit << 1, 0, 0;
  Points two(1, 3);
  two << 2, 0, 0;
  std::vector<DatasetPair> pairs{handmade_pair("a0", "a", origin, 1),
                                 handmade_pair("a1", "a", origin, 1),
                                 handmade_pair("a2", "a", origin, 1),
                                 handmade_pair("b0", "b", origin, 1)};
  const Completer shifted = [&](const DatasetPair& p, Index) { return p.category == "a" ? unit : two; };
  const auto r = evaluate(shifted, pairs, {1}).at(1);
  CHECK(r.per_category.at("a").cd == 2.0);
  CHECK(r.per_category.at("b").cd == 8.0);
  CHECK(r.cd == 5.0);
  CHECK(r.fscore == 0.0);
}

TEST_CASE("evaluate rejects resolutions the model cannot emit") {
  const VRCNetConfig cfg = test::tiny_vrcnet();
  ParamRegistry reg;
  Rng rng(1);
  add_vrcnet(reg, cfg, rng);
  const Dataset ds = test::tiny_dataset({ShapeFamily::box});
  const auto pairs = first_pairs(ds, 1);
  CHECK_NOTHROW(evaluate(vrcnet_completer(reg, cfg), pairs, {64, 128}));
  CHECK_THROWS_WITH_AS(evaluate(vrcnet_completer(reg, cfg), pairs, {256}),
                       doctest::Contains("unsupported"), std::invalid_argument);
}

TEST_CASE("evaluation report round-trips through JSON") {
  const Dataset ds = test::tiny_dataset({ShapeFamily::box, ShapeFamily::table});
  std::vector<DatasetPair> pairs{ds.pairs[0], ds.pairs[30]};
  const Completer coarse = [](const DatasetPair& p, Index res) {
    return Points(p.complete.at(res)->topRows(res / 2));
  };
  const auto reports = evaluate(coarse, pairs, {64, 128});
  const auto j = nlohmann::json::parse(to_json(reports).dump());
  for (const auto& [res, r] : reports) {
    const MetricReport back = metric_report_from_json(j.at(std::to_string(res)));
    CHECK(back.cd == r.cd);
    CHECK(back.fscore == r.fscore);
    CHECK(back.precision == r.precision);
    CHECK(back.recall == r.recall);
    REQUIRE(back.per_category.size() == r.per_category.size());
    for (const auto& [cat, s] : r.per_category) {
      CHECK(back.per_category.at(cat).cd == s.cd);
      CHECK(back.per_category.at(cat).fscore == s.fscore);
      CHECK(back.per_category.at(cat).count == s.count);
    }
  }
}

}  // TEST_SUITE
