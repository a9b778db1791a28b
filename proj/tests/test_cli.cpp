#include <doctest.h>

#include <fstream>
#include <limits>
#include <sstream>

#include <json.hpp>

#include "autothink/cli.h"
#include "autothink/config.h"
#include "support.h"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace autothink;

namespace {

struct Result {
  int code;
  std::string out, err;
};

Result run(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  const int code = cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

void put(const fs::path& p, const std::string& text) { std::ofstream(p, std::ios::binary) << text; }

json small_config(int steps = 10) {
  json stage1 = {{"stage", "Stage1"}, {"steps", steps}, {"batch_groups", 8}};
  json stage2 = {{"stage", "Stage2"}, {"steps", steps}, {"batch_groups", 8}};
  json stage3 = {{"stage", "Stage3"}, {"steps", steps}, {"batch_groups", 8}};
  return {{"seed", 3}, {"schedule", {stage1, stage2, stage3}}};
}

// 1000 single-rollout problems; `correct` of them right, every response `tokens` long.
std::string fixture(const std::string& kind, int correct, int tokens) {
  std::string s;
  for (int i = 0; i < 1000; ++i) {
    s += json{{"id", kind + std::to_string(i)},
              {"problem_id", "p" + std::to_string(i)},
              {"prompt_kind", kind},
              {"response_text", i % 3 ? "<think>\nwork it out\n</think>\n\nans" : "<think>\n...\n</think>\n\nans"},
              {"token_count", tokens},
              {"correct", i < correct}}
             .dump() +
         "\n";
  }
  return s;
}

}  // namespace

TEST_CASE("usage") {
  CHECK(run({}).code == cli::kUsage);
  CHECK(run({"--help"}).code == cli::kOk);
  CHECK(run({"bogus"}).code == cli::kUsage);
  CHECK(run({"train", "--config", "/nonexistent/cfg.json"}).code == cli::kUsage);
}

TEST_CASE("train") {
  const auto dir = testing::scratch_dir("cli_train");
  const auto cfg = dir / "cfg.json";

  SUBCASE("zero steps is a config error") {
    auto c = small_config();
    c["schedule"][1]["steps"] = 0;
    put(cfg, c.dump());
    const auto r = run({"train", "--config", cfg.string(), "--out", (dir / "a").string()});
    CHECK(r.code == cli::kUsage);
    CHECK(r.err.find("steps") != std::string::npos);
  }
  SUBCASE("outputs and determinism") {
    put(cfg, small_config().dump());
    REQUIRE(run({"train", "--config", cfg.string(), "--out", (dir / "a").string()}).code == cli::kOk);
    REQUIRE(run({"train", "--config", cfg.string(), "--out", (dir / "b").string()}).code == cli::kOk);
    const auto metrics = slurp(dir / "a" / "metrics.jsonl");
    CHECK(metrics == slurp(dir / "b" / "metrics.jsonl"));
    std::istringstream lines(metrics);
    std::string line;
    int n = 0;
    while (std::getline(lines, line)) {
      const auto j = json::parse(line);
      CHECK(j.at("step") == ++n);
    }
    CHECK(n == 30);
    std::size_t ckpts = 0;
    for (const auto& e : fs::directory_iterator(dir / "a" / "checkpoints")) ckpts += e.path().extension() == ".json";
    CHECK(ckpts == 3);
    const auto manifest = json::parse(slurp(dir / "a" / "manifest.json"));
    CHECK(manifest.at("seed") == 3);
    CHECK(manifest.at("config_hash").get<std::string>().size() == 16);
    CHECK(manifest.contains("versions"));
    CHECK_FALSE(fs::exists(dir / "a" / ".lock"));

    // --seed changes the run
    REQUIRE(run({"train", "--config", cfg.string(), "--out", (dir / "c").string(), "--seed", "4"}).code == cli::kOk);
    CHECK(slurp(dir / "c" / "metrics.jsonl") != metrics);
  }
  SUBCASE("a held lock refuses the run") {
    put(cfg, small_config().dump());
    fs::create_directories(dir / "a");
    OutputLock held(dir / "a");
    CHECK(run({"train", "--config", cfg.string(), "--out", (dir / "a").string()}).code == cli::kInternal);
  }
  SUBCASE("divergence") {
    auto c = small_config();
    c["schedule"][1]["learning_rate"] = std::numeric_limits<double>::max();
    c["policy_init"] = {{"think_logit", 0.0}, {"length_logit", 1.797e308}};
    put(cfg, c.dump());
    const auto r = run({"train", "--config", cfg.string(), "--out", (dir / "a").string()});
    CHECK(r.code == cli::kDiverged);
    CHECK(fs::exists(dir / "a" / "checkpoints" / "last_valid.json"));
    CHECK_FALSE(slurp(dir / "a" / "metrics.jsonl").empty());
  }
  fs::remove_all(dir);
}

TEST_CASE("default config gives three checkpoints") {
  const auto dir = testing::scratch_dir("cli_default");
  const auto r = run({"train", "--config", AUTOTHINK_DATA_DIR "/default_config.json", "--out", dir.string()});
  REQUIRE(r.code == cli::kOk);
  std::size_t ckpts = 0;
  for (const auto& e : fs::directory_iterator(dir / "checkpoints")) ckpts += e.path().extension() == ".json";
  CHECK(ckpts == 3);
  CHECK(fs::file_size(dir / "metrics.jsonl") > 0);
  fs::remove_all(dir);
}

TEST_CASE("sweep") {
  const auto dir = testing::scratch_dir("cli_sweep");
  auto c = small_config(5);
  put(dir / "cfg.json", c.dump());
  CHECK(run({"sweep", "--config", (dir / "cfg.json").string(), "--out", (dir / "a").string()}).code == cli::kUsage);
  put(dir / "grid.json", R"({"gamma": [0.3, 0.7]})");
  const auto r = run({"sweep", "--config", (dir / "cfg.json").string(), "--grid", (dir / "grid.json").string(),
                      "--out", (dir / "a").string()});
  REQUIRE(r.code == cli::kOk);
  const auto report = json::parse(slurp(dir / "a" / "sweep.json"));
  CHECK(report.at("points").size() == 2);
  CHECK(fs::exists(dir / "a" / "sweep.csv"));
  fs::remove_all(dir);
}

TEST_CASE("analyze") {
  const auto dir = testing::scratch_dir("cli_analyze");
  const auto input = dir / "t.jsonl";

  SUBCASE("empty input") {
    put(input, "");
    CHECK(run({"analyze", input.string(), "--out", (dir / "r").string()}).code == cli::kNoInput);
    put(input, "not json\n{\"id\": 3}\n");
    const auto r = run({"analyze", input.string(), "--out", (dir / "r").string()});
    CHECK(r.code == cli::kNoInput);
    CHECK(r.err.find("line 1") != std::string::npos);
    CHECK(r.err.find("line 2") != std::string::npos);
  }
  SUBCASE("reference fixture with supplied baselines") {
    put(input, fixture("tbd", 517, 5108) + "garbage line\n");
    put(dir / "base.json",
        R"({"all": {"standard": {"accuracy": 48.6, "tokens": 10633}, "no_thinking": {"accuracy": 37.5, "tokens": 2528}}})");
    const auto r = run({"analyze", input.string(), "--baselines", (dir / "base.json").string(), "--out",
                        (dir / "r").string()});
    REQUIRE(r.code == cli::kOk);
    const auto report = json::parse(slurp(dir / "r" / "report.json"));
    CHECK(report.at("input").at("skipped") == 1);
    const double f = report.at("efficiency_f1").at("rows").at(0).at("e_f1").get<double>();
    CHECK(f == doctest::Approx(39.6).epsilon(0.1 / 39.6));
    for (const char* csv : {"summary.csv", "efficiency_f1.csv", "no_thinking_by_level.csv", "keywords.csv"}) {
      CHECK(fs::exists(dir / "r" / csv));
    }
  }
  SUBCASE("baselines derived from standard and no-thinking runs") {
    put(input, fixture("standard", 486, 10633) + fixture("no_thinking", 375, 2528) + fixture("tbd", 517, 5108));
    REQUIRE(run({"analyze", input.string(), "--out", (dir / "r").string()}).code == cli::kOk);
    const auto report = json::parse(slurp(dir / "r" / "report.json"));
    bool found = false;
    for (const auto& row : report.at("efficiency_f1").at("rows")) {
      if (row.at("prompt_kind") != "tbd") continue;
      found = true;
      CHECK(row.at("e_f1").get<double>() == doctest::Approx(39.6).epsilon(0.1 / 39.6));
    }
    CHECK(found);
  }
  SUBCASE("missing baselines") {
    put(input, fixture("tbd", 517, 5108));
    REQUIRE(run({"analyze", input.string(), "--out", (dir / "r").string()}).code == cli::kOk);
    const auto report = json::parse(slurp(dir / "r" / "report.json"));
    CHECK(report.at("efficiency_f1").contains("notice"));
    CHECK_FALSE(report.at("efficiency_f1").contains("rows"));
  }
  fs::remove_all(dir);
}

TEST_CASE("reward-eval") {
  auto r = run({"reward-eval", "--stage", "Stage2", "--think", "false", "--correct", "true"});
  REQUIRE(r.code == cli::kOk);
  CHECK(json::parse(r.out).at("reward") == 2.0);
  r = run({"reward-eval", "--stage", "Stage1", "--think", "true", "--correct", "false", "--z", "0.8"});
  REQUIRE(r.code == cli::kOk);
  CHECK(json::parse(r.out).at("reward").get<double>() == doctest::Approx(-0.6));
  CHECK(run({"reward-eval", "--stage", "Stage1", "--think", "true", "--correct", "false", "--z", "1.5"}).code ==
        cli::kUsage);
  CHECK(run({"reward-eval", "--stage", "Stage9"}).code == cli::kUsage);
}

TEST_CASE("oracle-check") {
  CHECK(run({"oracle-check", "--count", "0"}).code == cli::kUsage);
  auto r = run({"oracle-check", "--count", "1000"});
  CHECK(r.code == cli::kOk);
  CHECK(r.out.find("policy_gradient") != std::string::npos);
  for (const char* fault : {"advantage", "reward", "gradient"}) {
    r = run({"oracle-check", "--count", "50", "--inject-fault", fault});
    CHECK(r.code == cli::kOracleFailure);
    CHECK(r.out.find("failing instance:") != std::string::npos);
  }
  CHECK(run({"oracle-check", "--inject-fault", "nonsense"}).code == cli::kUsage);
}
