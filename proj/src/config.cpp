#include "autothink/config.h"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

namespace autothink {

using nlohmann::json;

namespace {

[[noreturn]] void fail(const std::string& path, const std::string& msg) {
  throw ConfigError(path + ": " + msg);
}

void check_keys(const json& obj, const std::string& path, std::initializer_list<const char*> allowed) {
  if (!obj.is_object()) fail(path, "expected an object");
  const std::set<std::string> ok(allowed.begin(), allowed.end());
  for (const auto& [key, value] : obj.items()) {
    if (!ok.count(key)) fail(path + "." + key, "unknown key");
  }
}

double get_real(const json& obj, const char* key, const std::string& path, double fallback) {
  if (!obj.contains(key)) return fallback;
  const auto& v = obj[key];
  if (!v.is_number()) fail(path + "." + key, "expected a number");
  return v.get<double>();
}

std::int64_t get_int(const json& obj, const char* key, const std::string& path, std::int64_t fallback) {
  if (!obj.contains(key)) return fallback;
  const auto& v = obj[key];
  if (!v.is_number_integer()) fail(path + "." + key, "expected an integer");
  return v.get<std::int64_t>();
}

std::string get_string(const json& obj, const char* key, const std::string& path, const std::string& fallback) {
  if (!obj.contains(key)) return fallback;
  const auto& v = obj[key];
  if (!v.is_string()) fail(path + "." + key, "expected a string");
  return v.get<std::string>();
}

std::vector<double> get_reals(const json& v, const std::string& path) {
  if (!v.is_array()) fail(path, "expected an array of numbers");
  std::vector<double> out;
  for (const auto& x : v) {
    if (!x.is_number()) fail(path, "expected an array of numbers");
    out.push_back(x.get<double>());
  }
  return out;
}

template <typename F>
void wrap(const std::string& path, F&& fn) {
  try {
    fn();
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& e) {
    fail(path, e.what());
  }
}

std::string advantage_name(AdvantageMode m) { return m == AdvantageMode::ZScore ? "zscore" : "mean_center"; }

AdvantageMode advantage_from(const std::string& s, const std::string& path) {
  if (s == "zscore") return AdvantageMode::ZScore;
  if (s == "mean_center") return AdvantageMode::MeanCenter;
  fail(path, "unknown advantage mode '" + s + "'");
}

EnvParams env_from_json(const json& j, const std::string& path) {
  check_keys(j, path, {"kappa_think", "kappa_nothink", "base_len_think", "base_len_nothink", "len_spread", "buckets",
                       "length_bin_scales", "difficulty"});
  EnvParams env;
  env.kappa_think = get_real(j, "kappa_think", path, env.kappa_think);
  env.kappa_nothink = get_real(j, "kappa_nothink", path, env.kappa_nothink);
  env.base_len_think = get_int(j, "base_len_think", path, env.base_len_think);
  env.base_len_nothink = get_int(j, "base_len_nothink", path, env.base_len_nothink);
  env.len_spread = get_real(j, "len_spread", path, env.len_spread);
  const auto buckets = get_int(j, "buckets", path, static_cast<std::int64_t>(env.buckets));
  if (buckets < 1) fail(path + ".buckets", "must be positive");
  env.buckets = static_cast<std::size_t>(buckets);
  if (j.contains("length_bin_scales")) env.length_bin_scales = get_reals(j["length_bin_scales"], path + ".length_bin_scales");
  if (j.contains("difficulty")) {
    const std::string dp = path + ".difficulty";
    const auto& d = j["difficulty"];
    check_keys(d, dp, {"kind", "low", "high", "a", "b"});
    const auto kind = get_string(d, "kind", dp, "uniform");
    if (kind == "uniform") {
      env.difficulty.kind = DifficultyDistribution::Kind::Uniform;
    } else if (kind == "beta") {
      env.difficulty.kind = DifficultyDistribution::Kind::Beta;
    } else {
      fail(dp + ".kind", "expected 'uniform' or 'beta'");
    }
    env.difficulty.low = get_real(d, "low", dp, env.difficulty.low);
    env.difficulty.high = get_real(d, "high", dp, env.difficulty.high);
    env.difficulty.a = get_real(d, "a", dp, env.difficulty.a);
    env.difficulty.b = get_real(d, "b", dp, env.difficulty.b);
  }
  wrap(path, [&] { env.validate(); });
  return env;
}

json env_to_json(const EnvParams& env) {
  return {
      {"kappa_think", env.kappa_think},
      {"kappa_nothink", env.kappa_nothink},
      {"base_len_think", env.base_len_think},
      {"base_len_nothink", env.base_len_nothink},
      {"len_spread", env.len_spread},
      {"buckets", env.buckets},
      {"length_bin_scales", env.length_bin_scales},
      {"difficulty",
       {{"kind", env.difficulty.kind == DifficultyDistribution::Kind::Uniform ? "uniform" : "beta"},
        {"low", env.difficulty.low},
        {"high", env.difficulty.high},
        {"a", env.difficulty.a},
        {"b", env.difficulty.b}}},
  };
}

StageConfig stage_from_json(const json& j, const std::string& path) {
  check_keys(j, path, {"stage", "steps", "batch_groups", "group_size", "learning_rate", "clip_epsilon", "gamma",
                       "lambda", "alpha", "beta", "reward_law", "advantage", "context_length"});
  if (!j.contains("stage")) fail(path + ".stage", "required");
  StageConfig s;
  wrap(path + ".stage", [&] { s.stage = stage_from_string(get_string(j, "stage", path, "")); });
  s.steps = static_cast<int>(get_int(j, "steps", path, 500));
  s.batch_groups = static_cast<int>(get_int(j, "batch_groups", path, s.batch_groups));
  s.group_size = static_cast<int>(get_int(j, "group_size", path, s.group_size));
  const double lr = s.stage == Stage::Stage3 ? kDefaultStage3LearningRate : kDefaultLearningRate;
  s.learning_rate = get_real(j, "learning_rate", path, lr);
  s.clip.epsilon = get_real(j, "clip_epsilon", path, s.clip.epsilon);
  s.stage1.gamma = get_real(j, "gamma", path, s.stage1.gamma);
  s.stage1.lambda = get_real(j, "lambda", path, s.stage1.lambda);
  s.stage3.alpha = get_real(j, "alpha", path, s.stage3.alpha);
  s.stage3.beta = get_real(j, "beta", path, s.stage3.beta);
  if (j.contains("reward_law")) {
    wrap(path + ".reward_law", [&] { s.reward_law = reward_law_from_string(get_string(j, "reward_law", path, "")); });
  }
  s.advantage = advantage_from(get_string(j, "advantage", path, "zscore"), path + ".advantage");
  s.context_length = static_cast<int>(get_int(j, "context_length", path, 0));
  wrap(path, [&] { s.validate(); });
  return s;
}

json stage_to_json(const StageConfig& s) {
  json j = {
      {"stage", to_string(s.stage)},
      {"steps", s.steps},
      {"batch_groups", s.batch_groups},
      {"group_size", s.group_size},
      {"learning_rate", s.learning_rate},
      {"clip_epsilon", s.clip.epsilon},
      {"gamma", s.stage1.gamma},
      {"lambda", s.stage1.lambda},
      {"alpha", s.stage3.alpha},
      {"beta", s.stage3.beta},
      {"advantage", advantage_name(s.advantage)},
      {"context_length", s.context_length},
  };
  if (s.reward_law) j["reward_law"] = to_string(*s.reward_law);
  return j;
}

json grid_to_json(const SweepGrid& g) {
  json axes = json::array();
  for (const auto& [name, values] : g.axes) axes.push_back({{"name", name}, {"values", values}});
  return axes;
}

}  // namespace

SweepGrid grid_from_json(const json& doc) {
  SweepGrid grid;
  if (doc.is_object()) {
    for (const auto& [name, values] : doc.items()) grid.axes.emplace_back(name, get_reals(values, "sweep_grid." + name));
  } else if (doc.is_array()) {
    for (const auto& axis : doc) {
      check_keys(axis, "sweep_grid[]", {"name", "values"});
      if (!axis.contains("name") || !axis["name"].is_string()) fail("sweep_grid[].name", "expected a string");
      if (!axis.contains("values")) fail("sweep_grid[].values", "required");
      grid.axes.emplace_back(axis["name"].get<std::string>(), get_reals(axis["values"], "sweep_grid[].values"));
    }
  } else {
    fail("sweep_grid", "expected an object or an array of axes");
  }
  for (const auto& [name, values] : grid.axes) {
    if (values.empty()) fail("sweep_grid." + name, "no values");
    std::vector<StageConfig> probe = default_schedule();
    EnvParams env;
    wrap("sweep_grid." + name, [&] { apply_parameter(name, values.front(), probe, env); });
  }
  return grid;
}

SurrogatePolicy ExperimentConfig::initial_policy() const {
  return SurrogatePolicy(env.buckets, env.length_bins(), policy_init.think_logit, policy_init.length_logit);
}

void ExperimentConfig::validate() const {
  if (schedule.empty()) fail("schedule", "must not be empty");
  if (workers < 1) fail("workers", "must be >= 1");
  if (output_dir.empty()) fail("output_dir", "must not be empty");
  wrap("env", [&] { env.validate(); });
  for (std::size_t i = 0; i < schedule.size(); ++i) {
    wrap("schedule[" + std::to_string(i) + "]", [&] { schedule[i].validate(); });
  }
  if (!std::isfinite(policy_init.think_logit) || !std::isfinite(policy_init.length_logit)) {
    fail("policy_init", "logits must be finite");
  }
}

ExperimentConfig config_from_json(const json& doc) {
  check_keys(doc, "config", {"seed", "output_dir", "workers", "env", "policy_init", "schedule", "sweep_grid",
                             "sweep_options"});
  ExperimentConfig cfg;
  if (doc.contains("seed")) {
    if (!doc["seed"].is_number_unsigned()) fail("config.seed", "expected a non-negative integer");
    cfg.seed = doc["seed"].get<std::uint64_t>();
  }
  cfg.output_dir = get_string(doc, "output_dir", "config", cfg.output_dir);
  const auto workers = get_int(doc, "workers", "config", 1);
  if (workers < 1 || workers > 256) fail("config.workers", "must lie in [1, 256]");
  cfg.workers = static_cast<unsigned>(workers);
  if (doc.contains("env")) cfg.env = env_from_json(doc["env"], "config.env");
  if (doc.contains("policy_init")) {
    const auto& p = doc["policy_init"];
    check_keys(p, "config.policy_init", {"think_logit", "length_logit"});
    cfg.policy_init.think_logit = get_real(p, "think_logit", "config.policy_init", 0.0);
    cfg.policy_init.length_logit = get_real(p, "length_logit", "config.policy_init", 0.0);
  }
  if (doc.contains("schedule")) {
    const auto& s = doc["schedule"];
    if (!s.is_array()) fail("config.schedule", "expected an array");
    cfg.schedule.clear();
    for (std::size_t i = 0; i < s.size(); ++i) {
      cfg.schedule.push_back(stage_from_json(s[i], "config.schedule[" + std::to_string(i) + "]"));
    }
  }
  if (doc.contains("sweep_grid") && !doc["sweep_grid"].is_null()) cfg.sweep_grid = grid_from_json(doc["sweep_grid"]);
  if (doc.contains("sweep_options")) {
    const auto& o = doc["sweep_options"];
    const std::string p = "config.sweep_options";
    check_keys(o, p, {"checkpoint_steps", "window", "trajectory_stride"});
    if (o.contains("checkpoint_steps")) {
      for (double v : get_reals(o["checkpoint_steps"], p + ".checkpoint_steps")) {
        cfg.sweep_options.checkpoint_steps.push_back(static_cast<std::int64_t>(v));
      }
    }
    const auto window = get_int(o, "window", p, 100);
    const auto stride = get_int(o, "trajectory_stride", p, 10);
    if (window < 1) fail(p + ".window", "must be positive");
    if (stride < 1) fail(p + ".trajectory_stride", "must be positive");
    cfg.sweep_options.window = static_cast<std::size_t>(window);
    cfg.sweep_options.trajectory_stride = static_cast<std::size_t>(stride);
  }
  cfg.validate();
  return cfg;
}

json to_json(const ExperimentConfig& cfg) {
  json schedule = json::array();
  for (const auto& s : cfg.schedule) schedule.push_back(stage_to_json(s));
  json j = {
      {"seed", cfg.seed},
      {"output_dir", cfg.output_dir},
      {"workers", cfg.workers},
      {"env", env_to_json(cfg.env)},
      {"policy_init", {{"think_logit", cfg.policy_init.think_logit}, {"length_logit", cfg.policy_init.length_logit}}},
      {"schedule", schedule},
      {"sweep_options",
       {{"checkpoint_steps", cfg.sweep_options.checkpoint_steps},
        {"window", cfg.sweep_options.window},
        {"trajectory_stride", cfg.sweep_options.trajectory_stride}}},
  };
  if (cfg.sweep_grid) j["sweep_grid"] = grid_to_json(*cfg.sweep_grid);
  return j;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(path.string() + ": cannot open config");
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
  return config_from_json(doc);
}

std::string fnv1a_hex(const std::string& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::string config_hash(const ExperimentConfig& cfg) {
  // Output location and worker count do not change results.
  json j = to_json(cfg);
  j.erase("output_dir");
  j.erase("workers");
  return fnv1a_hex(j.dump());
}

nlohmann::ordered_json to_json(const TrainLogRecord& rec) {
  return {
      {"step", rec.step},
      {"stage", to_string(rec.stage)},
      {"thinking_rate", rec.thinking_rate},
      {"mean_reward", rec.mean_reward},
      {"accuracy", rec.accuracy},
      {"mean_length", rec.mean_length},
      {"mean_length_correct", rec.mean_length_correct},
      {"per_bucket_thinking_rate", rec.per_bucket_thinking_rate},
  };
}

TrainLogRecord log_record_from_json(const json& j) {
  TrainLogRecord rec;
  rec.step = j.at("step").get<std::int64_t>();
  rec.stage = stage_from_string(j.at("stage").get<std::string>());
  rec.thinking_rate = j.at("thinking_rate").get<double>();
  rec.mean_reward = j.at("mean_reward").get<double>();
  rec.accuracy = j.at("accuracy").get<double>();
  rec.mean_length = j.at("mean_length").get<double>();
  rec.mean_length_correct = j.at("mean_length_correct").get<double>();
  rec.per_bucket_thinking_rate = j.at("per_bucket_thinking_rate").get<std::vector<double>>();
  return rec;
}

json checkpoint_json(const Checkpoint& ckpt, const std::string& config_hash) {
  const auto think = ckpt.policy.think_logits();
  const auto length = ckpt.policy.length_logits();
  return {
      {"config_hash", config_hash},
      {"step", ckpt.step},
      {"stage_index", ckpt.stage_index},
      {"stage", to_string(ckpt.stage)},
      {"buckets", ckpt.policy.buckets()},
      {"bins", ckpt.policy.bins()},
      {"think_logits", std::vector<double>(think.begin(), think.end())},
      {"length_logits", std::vector<double>(length.begin(), length.end())},
  };
}

SurrogatePolicy policy_from_checkpoint(const json& j) {
  const auto buckets = j.at("buckets").get<std::size_t>();
  const auto bins = j.at("bins").get<std::size_t>();
  const auto think = j.at("think_logits").get<std::vector<double>>();
  const auto length = j.at("length_logits").get<std::vector<double>>();
  if (think.size() != buckets || length.size() != buckets * bins) {
    throw std::invalid_argument("checkpoint: parameter count does not match shape");
  }
  SurrogatePolicy p(buckets, bins);
  for (std::size_t i = 0; i < think.size(); ++i) p.think_logits()[i] = think[i];
  for (std::size_t i = 0; i < length.size(); ++i) p.length_logits()[i] = length[i];
  return p;
}

json run_manifest(const ExperimentConfig& cfg, const std::string& command, const std::vector<std::string>& files) {
  std::ostringstream json_version;
  json_version << NLOHMANN_JSON_VERSION_MAJOR << '.' << NLOHMANN_JSON_VERSION_MINOR << '.'
               << NLOHMANN_JSON_VERSION_PATCH;
  return {
      {"command", command},
      {"config_hash", config_hash(cfg)},
      {"seed", cfg.seed},
      {"versions", {{"autothink", kVersion}, {"compiler", __VERSION__}, {"nlohmann_json", json_version.str()}}},
      {"files", files},
      {"config", to_json(cfg)},
  };
}

OutputLock::OutputLock(const std::filesystem::path& dir) : path_(dir / ".lock") {
  std::FILE* f = std::fopen(path_.string().c_str(), "wx");
  if (!f) throw std::runtime_error("output directory is in use (lock file " + path_.string() + " exists)");
  std::fclose(f);
}

OutputLock::~OutputLock() {
  std::error_code ec;
  std::filesystem::remove(path_, ec);
}

}  // namespace autothink
