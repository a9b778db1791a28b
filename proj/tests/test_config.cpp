#include <doctest.h>

#include <fstream>

#include "autothink/config.h"
#include "support.h"

using namespace autothink;
using nlohmann::json;

TEST_CASE("empty document takes defaults") {
  const auto cfg = config_from_json(json::object());
  CHECK(cfg.seed == 1);
  CHECK(cfg.schedule.size() == 3);
  CHECK(cfg.schedule[2].learning_rate == kDefaultStage3LearningRate);
  CHECK_NOTHROW(cfg.validate());
}

TEST_CASE("shipped default config parses") {
  const auto cfg = load_config(AUTOTHINK_DATA_DIR "/default_config.json");
  REQUIRE(cfg.schedule.size() == 3);
  CHECK(cfg.schedule[0].steps == 500);
  CHECK(cfg.schedule[0].stage1.gamma == 0.5);
  CHECK(cfg.schedule[2].stage3.alpha == 0.05);
  REQUIRE(cfg.sweep_grid.has_value());
  CHECK(cfg.sweep_grid->axes[0].first == "gamma");
  CHECK(config_hash(cfg) == config_hash(config_from_json(to_json(cfg))));
}

TEST_CASE("strict parsing") {
  CHECK_THROWS_AS(config_from_json(json{{"sed", 1}}), ConfigError);
  CHECK_THROWS_AS(config_from_json(json{{"seed", "one"}}), ConfigError);
  CHECK_THROWS_AS(config_from_json(json{{"schedule", json::array({{{"stage", "Stage1"}, {"steps", 0}}})}}),
                  ConfigError);
  CHECK_THROWS_AS(config_from_json(json{{"schedule", json::array()}}), ConfigError);
  CHECK_THROWS_AS(config_from_json(json{{"env", {{"kappa_think", -1.0}}}}), ConfigError);
  try {
    (void)config_from_json(json{{"schedule", json::array({{{"stage", "Stage1"}, {"gama", 0.5}}})}});
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("schedule[0]") != std::string::npos);
  }
}

TEST_CASE("config hash") {
  ExperimentConfig a;
  ExperimentConfig b = a;
  b.output_dir = "elsewhere";
  b.workers = 4;
  CHECK(config_hash(a) == config_hash(b));
  b.seed = 2;
  CHECK(config_hash(a) != config_hash(b));
  CHECK(config_hash(a).size() == 16);
  // FNV-1a 64 reference values
  CHECK(fnv1a_hex("") == "cbf29ce484222325");
  CHECK(fnv1a_hex("a") == "af63dc4c8601ec8c");
}

TEST_CASE("log record round trip") {
  TrainLogRecord r;
  r.step = 12;
  r.stage = Stage::Stage2;
  r.thinking_rate = 0.25;
  r.mean_reward = -0.125;
  r.accuracy = 0.6;
  r.mean_length = 4000.5;
  r.mean_length_correct = 3000.0;
  r.per_bucket_thinking_rate = {0.0, 0.5, 1.0};
  const auto j = to_json(r);
  CHECK(j.begin().key() == "step");
  CHECK(log_record_from_json(json::parse(j.dump())) == r);
}

TEST_CASE("checkpoint round trip") {
  SurrogatePolicy p(3, 4);
  for (std::size_t i = 0; i < p.parameter_count(); ++i) p.parameter(i) = 0.1 * static_cast<double>(i) - 0.3;
  const Checkpoint c{1, Stage::Stage2, 40, p};
  const auto j = checkpoint_json(c, "abc");
  CHECK(j.at("config_hash") == "abc");
  CHECK(j.at("step") == 40);
  CHECK(policy_from_checkpoint(json::parse(j.dump())) == p);
}

TEST_CASE("manifest") {
  const ExperimentConfig cfg;
  const auto m = run_manifest(cfg, "train", {"metrics.jsonl"});
  CHECK(m.at("config_hash") == config_hash(cfg));
  CHECK(m.at("seed") == 1);
  CHECK(m.at("versions").at("autothink") == kVersion);
  CHECK(m.at("files").size() == 1);
}

TEST_CASE("output lock is exclusive") {
  const auto dir = testing::scratch_dir("lock");
  {
    OutputLock lock(dir);
    CHECK(std::filesystem::exists(dir / ".lock"));
    CHECK_THROWS(OutputLock{dir});
  }
  CHECK_FALSE(std::filesystem::exists(dir / ".lock"));
  CHECK_NOTHROW(OutputLock{dir});
  std::filesystem::remove_all(dir);
}
