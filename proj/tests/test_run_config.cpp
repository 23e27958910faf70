#include "support.hpp"

using namespace vrc;

TEST_SUITE("cli") {

TEST_CASE("config JSON round trip reproduces every section") {
  RunConfig c;
  c.dataset.divisor = 8;
  c.families = {ShapeFamily::lamp, ShapeFamily::box};
  c.train.base_lr = 3e-4;
  c.loss.kl_lambda = 0.5;
  c.model.renet.output_n = 2048;
  c.model.pmnet.latent = 16;
  c.classifier.trunk = {8, 16};
  c.classifier_train.steps = 7;
  const RunConfig back = run_config_from_json(nlohmann::json::parse(to_json(c).dump()));
  CHECK(to_json(back).dump() == to_json(c).dump());
  for (const char* section : {"dataset", "train", "loss", "pmnet", "renet", "classifier"}) {
    CHECK_MESSAGE(to_json(c).contains(section), section);
  }
}

TEST_CASE("a partial patch keeps the base values") {
  RunConfig base;
  base.train.epochs = 12;
  base.loss.lambda_fine = 2.0;
  const RunConfig c = run_config_from_json({{"train", {{"batch_size", 3}}}}, base);
  CHECK(c.train.batch_size == 3);
  CHECK(c.train.epochs == 12);
  CHECK(c.loss.lambda_fine == 2.0);
}

TEST_CASE("defaults < file < flags") {
  const RunConfig defaults;
  const nlohmann::json file = {{"train", {{"base_lr", 5e-4}, {"epochs", 9}}}};
  const RunConfig from_file = run_config_from_json(file, defaults);
  nlohmann::json flags = override_patch("train.base_lr=2e-3");
  flags.merge_patch(override_patch("dataset.mode=mvp40"));
  const RunConfig c = run_config_from_json(flags, from_file);
  CHECK(c.train.base_lr == 2e-3);
  CHECK(c.train.epochs == 9);
  CHECK(c.train.batch_size == defaults.train.batch_size);
  CHECK(c.dataset.mode == DatasetMode::mvp40);
}

TEST_CASE("unknown sections and keys are rejected") {
  CHECK_THROWS_WITH_AS(run_config_from_json({{"optimizer", {{"lr", 1}}}}),
                       doctest::Contains("optimizer"), std::invalid_argument);
  CHECK_THROWS_WITH_AS(run_config_from_json({{"train", {{"learning_rate", 1}}}}),
                       doctest::Contains("train.learning_rate"), std::invalid_argument);
  CHECK_THROWS_WITH_AS(run_config_from_json({{"renet", {{"depth", 3}}}}),
                       doctest::Contains("depth"), std::invalid_argument);
}

TEST_CASE("invalid values are rejected") {
  CHECK_THROWS_AS(run_config_from_json({{"train", {{"batch_size", 0}}}}), std::invalid_argument);
  CHECK_THROWS_AS(run_config_from_json({{"dataset", {{"mode", "kitti"}}}}), std::invalid_argument);
  CHECK_THROWS_AS(run_config_from_json({{"dataset", {{"divisor", "four"}}}}), std::invalid_argument);
  CHECK_THROWS_AS(run_config_from_json({{"loss", {{"kl_lambda", -1}}}}), std::invalid_argument);
}

TEST_CASE("override_patch parses JSON values and falls back to strings") {
  CHECK(override_patch("train.epochs=5") == nlohmann::json{{"train", {{"epochs", 5}}}});
  CHECK(override_patch("renet.channels=[8,8,8]") ==
        nlohmann::json{{"renet", {{"channels", {8, 8, 8}}}}});
  CHECK(override_patch("dataset.mode=mvp") == nlohmann::json{{"dataset", {{"mode", "mvp"}}}});
  CHECK_THROWS_AS(override_patch("epochs=5"), std::invalid_argument);
  CHECK_THROWS_AS(override_patch("train.epochs"), std::invalid_argument);
}

TEST_CASE("dataset_specs draws per family and is seeded") {
  RunConfig c;
  c.families = {ShapeFamily::chair, ShapeFamily::sphere};
  c.shapes_per_family = 3;
  const auto a = dataset_specs(c, 4);
  const auto b = dataset_specs(c, 4);
  const auto other = dataset_specs(c, 5);
  REQUIRE(a.size() == 6);
  CHECK(a[0].family == ShapeFamily::chair);
  CHECK(a[5].family == ShapeFamily::sphere);
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i].parameters == b[i].parameters);
  CHECK(a[0].parameters != other[0].parameters);
  // Adding a family leaves the others' draws alone.
  c.families = {ShapeFamily::lamp, ShapeFamily::chair, ShapeFamily::sphere};
  const auto more = dataset_specs(c, 4);
  CHECK(more[3].parameters == a[0].parameters);
}

}  // TEST_SUITE
