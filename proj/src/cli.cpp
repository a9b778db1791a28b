#include "autothink/cli.h"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>
#include <spdlog/sinks/ostream_sink.h>
#include <spdlog/spdlog.h>

#include "autothink/analytics.h"
#include "autothink/config.h"
#include "autothink/oracles.h"
#include "autothink/trainer.h"

namespace autothink::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::shared_ptr<spdlog::logger> make_logger(std::ostream& err) {
  auto sink = std::make_shared<spdlog::sinks::ostream_sink_mt>(err);
  auto log = std::make_shared<spdlog::logger>("autothink", sink);
  log->set_pattern("[%l] %v");
  const char* env = std::getenv("AUTOTHINK_LOG_LEVEL");
  log->set_level(env ? spdlog::level::from_str(env) : spdlog::level::info);
  return log;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write " + path.string());
  f << text;
}

void write_json(const fs::path& path, const json& j) { write_text(path, j.dump(2) + "\n"); }

std::string read_file(const fs::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open " + path.string());
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

std::string csv_escape(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) out += c == '"' ? std::string("\"\"") : std::string(1, c);
  return out + "\"";
}

std::string num(double v) {
  json j = v;
  return j.dump();
}

struct CommonOptions {
  std::string config;
  std::string out;
  std::optional<std::uint64_t> seed;
};

ExperimentConfig resolve_config(const CommonOptions& o) {
  ExperimentConfig cfg = o.config.empty() ? ExperimentConfig{} : load_config(o.config);
  if (!o.out.empty()) cfg.output_dir = o.out;
  if (o.seed) cfg.seed = *o.seed;
  cfg.validate();
  return cfg;
}

// ---- train ----------------------------------------------------------------

int cmd_train(const CommonOptions& opts, spdlog::logger& log, std::ostream& out) {
  ExperimentConfig cfg;
  try {
    cfg = resolve_config(opts);
  } catch (const std::exception& e) {
    log.error("invalid config: {}", e.what());
    return kUsage;
  }
  const fs::path dir = cfg.output_dir;
  fs::create_directories(dir / "checkpoints");
  OutputLock lock(dir);
  const std::string hash = config_hash(cfg);

  std::vector<std::string> files{"metrics.jsonl"};
  auto save_checkpoint = [&](const Checkpoint& c, const std::string& name) {
    write_json(dir / "checkpoints" / name, checkpoint_json(c, hash));
    files.push_back("checkpoints/" + name);
  };
  auto checkpoint_name = [](const Checkpoint& c) {
    return "stage" + std::to_string(c.stage_index) + "_" + to_string(c.stage) + "_step" + std::to_string(c.step) +
           ".json";
  };
  auto write_metrics = [&](const std::vector<TrainLogRecord>& records) {
    std::string text;
    for (const auto& r : records) text += to_json(r).dump() + "\n";
    write_text(dir / "metrics.jsonl", text);
  };

  log.info("train: {} stages, seed {}, config {}", cfg.schedule.size(), cfg.seed, hash);
  int code = kOk;
  try {
    const auto result = run_pipeline(cfg.schedule, cfg.env, cfg.initial_policy(), {cfg.seed, cfg.workers},
                                     [&](const Checkpoint& c) {
                                       save_checkpoint(c, checkpoint_name(c));
                                       log.info("checkpoint {} at step {}", to_string(c.stage), c.step);
                                     });
    write_metrics(result.log);
    out << "trained " << result.log.size() << " steps; outputs in " << dir.string() << "\n";
  } catch (const StageDivergence& e) {
    write_metrics(e.log());
    const Checkpoint last{0, e.log().empty() ? Stage::Stage1 : e.log().back().stage,
                          static_cast<std::int64_t>(e.log().size()), e.last_valid()};
    save_checkpoint(last, "last_valid.json");
    log.error("training diverged at step {}: {}", e.log().size(), e.what());
    code = kDiverged;
  }
  write_json(dir / "manifest.json", run_manifest(cfg, "train", files));
  return code;
}

// ---- sweep ----------------------------------------------------------------

int cmd_sweep(const CommonOptions& opts, const std::string& grid_path, spdlog::logger& log, std::ostream& out) {
  ExperimentConfig cfg;
  try {
    cfg = resolve_config(opts);
    if (!grid_path.empty()) cfg.sweep_grid = grid_from_json(json::parse(read_file(grid_path)));
    if (!cfg.sweep_grid || cfg.sweep_grid->axes.empty()) throw ConfigError("sweep: no grid given (--grid or sweep_grid)");
  } catch (const std::exception& e) {
    log.error("invalid sweep: {}", e.what());
    return kUsage;
  }
  const fs::path dir = cfg.output_dir;
  fs::create_directories(dir);
  OutputLock lock(dir);

  log.info("sweep: {} points", cfg.sweep_grid->points().size());
  const auto report = sweep(cfg.schedule, *cfg.sweep_grid, cfg.env, cfg.initial_policy(), {cfg.seed, cfg.workers},
                            cfg.sweep_options);

  json points = json::array();
  std::vector<std::string> axis_names;
  for (const auto& [name, values] : cfg.sweep_grid->axes) axis_names.push_back(name);
  std::string csv;
  for (const auto& n : axis_names) csv += n + ",";
  csv += "ok,steady_thinking_rate,final_mean_length,final_accuracy,thinking_rate_at,error\n";
  std::size_t failed = 0;
  for (const auto& p : report.points) {
    json at = json::array();
    std::string at_csv;
    for (const auto& [step, rate] : p.thinking_rate_at) {
      at.push_back({{"step", step}, {"thinking_rate", rate}});
      at_csv += (at_csv.empty() ? "" : ";") + std::to_string(step) + ":" + num(rate);
    }
    json traj = json::array();
    for (const auto& [step, len] : p.length_trajectory) traj.push_back({step, len});
    points.push_back({{"params", p.params},
                      {"ok", p.ok},
                      {"error", p.error},
                      {"thinking_rate_at", at},
                      {"steady_thinking_rate", p.steady_thinking_rate},
                      {"final_mean_length", p.final_mean_length},
                      {"final_accuracy", p.final_accuracy},
                      {"length_trajectory", traj}});
    for (const auto& n : axis_names) csv += num(p.params.at(n)) + ",";
    csv += std::string(p.ok ? "true" : "false") + "," + num(p.steady_thinking_rate) + "," + num(p.final_mean_length) +
           "," + num(p.final_accuracy) + "," + at_csv + "," + csv_escape(p.error) + "\n";
    if (!p.ok) {
      ++failed;
      log.warn("sweep point failed: {}", p.error);
    }
  }
  write_json(dir / "sweep.json", {{"config_hash", config_hash(cfg)}, {"points", points}});
  write_text(dir / "sweep.csv", csv);
  write_json(dir / "manifest.json", run_manifest(cfg, "sweep", {"sweep.json", "sweep.csv"}));
  out << "swept " << report.points.size() << " points (" << failed << " failed); outputs in " << dir.string() << "\n";
  return kOk;
}

// ---- analyze --------------------------------------------------------------

Transcript transcript_from_json(const json& j) {
  if (!j.is_object()) throw std::invalid_argument("not an object");
  Transcript t;
  if (!j.contains("id") || !j["id"].is_string()) throw std::invalid_argument("missing string 'id'");
  t.id = j["id"].get<std::string>();
  if (!j.contains("response_text") || !j["response_text"].is_string()) {
    throw std::invalid_argument("missing string 'response_text'");
  }
  t.response_text = j["response_text"].get<std::string>();
  if (j.contains("problem_id")) {
    if (!j["problem_id"].is_string()) throw std::invalid_argument("'problem_id' must be a string");
    t.problem_id = j["problem_id"].get<std::string>();
  }
  t.dataset = j.value("dataset", std::string("all"));
  if (j.contains("prompt_kind") && !j["prompt_kind"].is_null()) {
    t.prompt_kind = prompt_variant_from_string(j["prompt_kind"].get<std::string>());
  }
  if (j.contains("token_count") && !j["token_count"].is_null()) {
    if (!j["token_count"].is_number_integer() || j["token_count"].get<std::int64_t>() < 0) {
      throw std::invalid_argument("'token_count' must be a non-negative integer");
    }
    t.token_count = j["token_count"].get<std::int64_t>();
  }
  if (j.contains("correct") && !j["correct"].is_null()) {
    if (!j["correct"].is_boolean()) throw std::invalid_argument("'correct' must be a boolean");
    t.correct = j["correct"].get<bool>();
  }
  if (j.contains("difficulty") && !j["difficulty"].is_null()) {
    if (!j["difficulty"].is_number()) throw std::invalid_argument("'difficulty' must be a number");
    t.difficulty = j["difficulty"].get<double>();
  }
  return t;
}

struct Baseline {
  double acc_std, len_std, acc_no, len_no;
};

std::map<std::string, Baseline> baselines_from_json(const json& doc) {
  std::map<std::string, Baseline> out;
  if (!doc.is_object()) throw ConfigError("baselines: expected an object keyed by dataset");
  for (const auto& [dataset, b] : doc.items()) {
    auto pair = [&](const char* key) {
      const auto& v = b.at(key);
      return std::make_pair(v.at("accuracy").get<double>(), v.at("tokens").get<double>());
    };
    const auto [as, ls] = pair("standard");
    const auto [an, ln] = pair("no_thinking");
    out[dataset] = Baseline{as, ls, an, ln};
  }
  return out;
}

struct AnalyzeOptions {
  std::string transcripts;
  std::string baselines;
  std::string lexicon;
  std::string out;
  int tau = 0;
  int levels = 8;
  bool quantile = false;
};

int cmd_analyze(const AnalyzeOptions& o, spdlog::logger& log, std::ostream& out) {
  std::optional<std::map<std::string, Baseline>> baselines;
  Lexicon lexicon = default_lexicon();
  std::string input;
  try {
    if (o.tau < 0) throw ConfigError("--tau must be >= 0");
    if (o.levels < 2) throw ConfigError("--levels must be >= 2");
    input = read_file(o.transcripts);
    if (!o.baselines.empty()) baselines = baselines_from_json(json::parse(read_file(o.baselines)));
    if (!o.lexicon.empty()) lexicon = lexicon_from_json(read_file(o.lexicon));
  } catch (const std::exception& e) {
    log.error("analyze: {}", e.what());
    return kUsage;
  }

  std::vector<Transcript> transcripts;
  std::size_t line_no = 0, skipped = 0;
  {
    std::istringstream in(input);
    std::string line;
    while (std::getline(in, line)) {
      ++line_no;
      if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
      try {
        transcripts.push_back(transcript_from_json(json::parse(line)));
      } catch (const std::exception& e) {
        ++skipped;
        log.warn("line {}: skipped ({})", line_no, e.what());
      }
    }
  }
  if (transcripts.empty()) {
    log.error("analyze: no usable transcripts ({} malformed lines)", skipped);
    return kNoInput;
  }

  const fs::path dir = o.out;
  fs::create_directories(dir);
  OutputLock lock(dir);

  auto kind_name = [](const Transcript& t) { return t.prompt_kind ? to_string(*t.prompt_kind) : std::string("unknown"); };
  using Key = std::pair<std::string, std::string>;  // dataset, prompt kind
  std::map<Key, std::vector<Transcript>> groups;
  std::map<std::string, std::vector<const Transcript*>> by_dataset;
  for (const auto& t : transcripts) groups[{t.dataset, kind_name(t)}].push_back(t);
  for (const auto& t : transcripts) by_dataset[t.dataset].push_back(&t);

  json report;
  report["input"] = {{"lines", line_no}, {"parsed", transcripts.size()}, {"skipped", skipped}};
  report["tau"] = o.tau;

  // Summaries per (dataset, prompt kind).
  std::map<Key, BenchmarkSummary> summaries;
  json summary_rows = json::array();
  std::string summary_csv = "dataset,prompt_kind,accuracy,mean_tokens,problems,rollouts,approximate_tokens,thinking_rate,malformed,error\n";
  for (const auto& [key, list] : groups) {
    std::size_t think = 0, malformed = 0;
    for (const auto& t : list) {
      const Mode m = classify_mode(t, o.tau);
      think += m == Mode::Think;
      malformed += m == Mode::Malformed;
    }
    const std::size_t counted = list.size() - malformed;
    const double thinking_rate = counted ? static_cast<double>(think) / counted : 0.0;
    json row = {{"dataset", key.first}, {"prompt_kind", key.second}, {"thinking_rate", thinking_rate},
                {"malformed", malformed}};
    std::string error;
    try {
      const auto s = summarize_benchmark(list);
      summaries[key] = s;
      row["accuracy"] = s.accuracy;
      row["mean_tokens"] = s.mean_tokens;
      row["problems"] = s.problems;
      row["rollouts"] = s.rollouts;
      row["approximate_tokens"] = s.approximate_tokens;
      summary_csv += csv_escape(key.first) + "," + key.second + "," + num(s.accuracy) + "," + num(s.mean_tokens) +
                     "," + std::to_string(s.problems) + "," + std::to_string(s.rollouts) + "," +
                     (s.approximate_tokens ? "true" : "false");
    } catch (const std::exception& e) {
      error = e.what();
      row["error"] = error;
      log.warn("{}/{}: {}", key.first, key.second, error);
      summary_csv += csv_escape(key.first) + "," + key.second + ",,,,,";
    }
    summary_csv += "," + num(thinking_rate) + "," + std::to_string(malformed) + "," + csv_escape(error) + "\n";
    summary_rows.push_back(row);
  }
  report["summaries"] = summary_rows;

  // E-F1 against supplied or derived baselines.
  std::map<std::string, Baseline> base;
  if (baselines) {
    base = *baselines;
  } else {
    for (const auto& [dataset, list] : by_dataset) {
      const auto s = summaries.find({dataset, "standard"});
      const auto n = summaries.find({dataset, "no_thinking"});
      if (s != summaries.end() && n != summaries.end()) {
        base[dataset] = Baseline{s->second.accuracy, s->second.mean_tokens, n->second.accuracy, n->second.mean_tokens};
      }
    }
  }
  std::string ef1_csv = "dataset,prompt_kind,accuracy,mean_tokens,e_f1\n";
  if (base.empty()) {
    report["efficiency_f1"] = {{"notice", "no standard/no-thinking baselines supplied; E-F1 omitted"}};
    log.info("no baselines; E-F1 omitted");
  } else {
    json rows = json::array();
    std::map<std::string, std::vector<EfficiencyInputs>> per_kind;
    for (const auto& [key, s] : summaries) {
      const auto b = base.find(key.first);
      if (b == base.end()) continue;
      const EfficiencyInputs in{s.accuracy, s.mean_tokens, b->second.acc_std, b->second.len_std, b->second.acc_no,
                                b->second.len_no};
      json row = {{"dataset", key.first}, {"prompt_kind", key.second}, {"accuracy", s.accuracy},
                  {"mean_tokens", s.mean_tokens}};
      try {
        const double f = efficiency_f1(in.acc, in.len, in.acc_std, in.len_std, in.acc_no, in.len_no);
        row["e_f1"] = f;
        per_kind[key.second].push_back(in);
        ef1_csv += csv_escape(key.first) + "," + key.second + "," + num(s.accuracy) + "," + num(s.mean_tokens) + "," +
                   num(f) + "\n";
      } catch (const std::exception& e) {
        row["error"] = e.what();
        log.warn("{}: {}", key.first, e.what());
      }
      rows.push_back(row);
    }
    json avg = json::array();
    for (const auto& [kind, ins] : per_kind) {
      const double a = efficiency_f1_of_averages(ins);
      const double m = efficiency_f1_mean_of_rows(ins);
      avg.push_back({{"prompt_kind", kind}, {"datasets", ins.size()}, {"from_averages", a}, {"mean_of_datasets", m}});
      ef1_csv += "AVG(from_averages)," + kind + ",,," + num(a) + "\nAVG(mean_of_datasets)," + kind + ",,," + num(m) + "\n";
    }
    report["efficiency_f1"] = {{"rows", rows}, {"avg", avg}};
  }

  // No-thinking rate per difficulty level; levels come from per-problem pass rates.
  json level_rows = json::array();
  std::string level_csv = "dataset,prompt_kind";
  for (int l = 0; l < o.levels; ++l) level_csv += ",level" + std::to_string(l);
  level_csv += "\n";
  for (const auto& [dataset, list] : by_dataset) {
    std::map<std::string, std::pair<double, double>> stats;  // correct, total
    std::map<std::string, double> fallback;
    for (const auto* t : list) {
      const std::string pid = t->problem_id.empty() ? t->id : t->problem_id;
      if (t->correct) {
        stats[pid].first += *t->correct;
        stats[pid].second += 1.0;
      } else if (t->difficulty) {
        fallback[pid] = std::clamp(1.0 - *t->difficulty, 0.0, 1.0);
      }
    }
    std::vector<std::string> ids;
    std::vector<double> rates;
    for (const auto& [pid, cn] : stats) {
      ids.push_back(pid);
      rates.push_back(cn.first / cn.second);
    }
    for (const auto& [pid, r] : fallback) {
      if (!stats.count(pid)) {
        ids.push_back(pid);
        rates.push_back(r);
      }
    }
    if (ids.empty()) continue;
    const auto levels = difficulty_buckets(rates, o.levels, o.quantile ? Binning::Quantile : Binning::EqualWidth);
    std::map<std::string, int> level_of;
    for (std::size_t i = 0; i < ids.size(); ++i) level_of[ids[i]] = levels[i];

    std::map<std::string, std::pair<std::vector<int>, std::vector<Mode>>> per_kind;
    for (const auto* t : list) {
      const auto it = level_of.find(t->problem_id.empty() ? t->id : t->problem_id);
      if (it == level_of.end()) continue;
      auto& [lv, md] = per_kind[kind_name(*t)];
      lv.push_back(it->second);
      md.push_back(classify_mode(*t, o.tau));
    }
    for (const auto& [kind, lm] : per_kind) {
      const auto r = no_thinking_rate_by_level(lm.first, lm.second, o.levels);
      json arr = json::array();
      level_csv += csv_escape(dataset) + "," + kind;
      for (const auto& v : r) {
        arr.push_back(v ? json(*v) : json(nullptr));
        level_csv += "," + (v ? num(*v) : std::string());
      }
      level_csv += "\n";
      level_rows.push_back({{"dataset", dataset}, {"prompt_kind", kind}, {"rates", arr}});
    }
  }
  report["no_thinking_rate_by_level"] = {{"levels", o.levels},
                                         {"binning", o.quantile ? "quantile" : "equal_width"},
                                         {"rows", level_rows}};

  // Keyword rates per (dataset, prompt kind, mode), pooled over transcripts.
  json kw_rows = json::array();
  std::string kw_csv = "dataset,prompt_kind,mode,category,rate_per_1000\n";
  for (const auto& [key, list] : groups) {
    std::map<Mode, std::pair<std::vector<double>, double>> pooled;  // matches per category, tokens
    for (const auto& t : list) {
      const Mode m = classify_mode(t, o.tau);
      if (m == Mode::Malformed) continue;
      const auto rates = keyword_profile(t.response_text, lexicon);
      const double tokens = static_cast<double>(word_count(t.response_text));
      auto& [matches, total] = pooled[m];
      matches.resize(rates.size(), 0.0);
      for (std::size_t c = 0; c < rates.size(); ++c) matches[c] += rates[c].second * tokens / 1000.0;
      total += tokens;
    }
    for (const auto& [mode, mt] : pooled) {
      json rates = json::object();
      for (std::size_t c = 0; c < lexicon.size(); ++c) {
        const double r = mt.second > 0 ? 1000.0 * mt.first[c] / mt.second : 0.0;
        rates[lexicon[c].first] = r;
        kw_csv += csv_escape(key.first) + "," + key.second + "," + to_string(mode) + "," + csv_escape(lexicon[c].first) +
                  "," + num(r) + "\n";
      }
      kw_rows.push_back({{"dataset", key.first}, {"prompt_kind", key.second}, {"mode", to_string(mode)}, {"rates", rates}});
    }
  }
  report["keywords"] = {{"note", "default lexicon rates are not comparable to published absolute values"},
                        {"rows", kw_rows}};

  write_json(dir / "report.json", report);
  write_text(dir / "summary.csv", summary_csv);
  write_text(dir / "efficiency_f1.csv", ef1_csv);
  write_text(dir / "no_thinking_by_level.csv", level_csv);
  write_text(dir / "keywords.csv", kw_csv);
  const std::vector<std::string> files{"report.json", "summary.csv", "efficiency_f1.csv", "no_thinking_by_level.csv",
                                       "keywords.csv"};
  std::ostringstream json_version;
  json_version << NLOHMANN_JSON_VERSION_MAJOR << '.' << NLOHMANN_JSON_VERSION_MINOR << '.' << NLOHMANN_JSON_VERSION_PATCH;
  write_json(dir / "manifest.json",
             {{"command", "analyze"},
              {"input_hash", fnv1a_hex(input)},
              {"options", {{"tau", o.tau}, {"levels", o.levels}, {"quantile", o.quantile}}},
              {"versions", {{"autothink", kVersion}, {"compiler", __VERSION__}, {"nlohmann_json", json_version.str()}}},
              {"files", files}});
  if (skipped) log.warn("skipped {} malformed line(s)", skipped);
  out << "analyzed " << transcripts.size() << " transcripts (" << skipped << " skipped); outputs in " << dir.string()
      << "\n";
  return kOk;
}

// ---- reward-eval ----------------------------------------------------------

struct RewardOptions {
  std::string stage = "Stage1";
  bool think = true;
  bool correct = true;
  double z = 0.5;
  double gamma = 0.5;
  double lambda = 2.0;
  double y = 0.0;
  double alpha = 0.05;
  double beta = 0.05;
  std::string outcomes;
};

int cmd_reward_eval(const RewardOptions& o, spdlog::logger& log, std::ostream& out) {
  try {
    const Stage stage = stage_from_string(o.stage);
    const Stage1Params p1{o.gamma, o.lambda};
    const Stage3Params p3{o.alpha, o.beta};
    p1.validate();
    p3.validate();
    if (o.outcomes.empty()) {
      const Outcome oc{o.think, o.correct, 0, {}, 0};
      json r = {{"stage", to_string(stage)}, {"think", o.think}, {"correct", o.correct}};
      if (stage == Stage::Stage1) {
        if (!(o.z >= 0.0 && o.z <= 1.0)) throw std::invalid_argument("--z must lie in [0, 1]");
        const BatchStats stats{o.z, 0};
        const auto f = penalty_factors(stats, p1);
        r["delta_think"] = f.delta_think;
        r["delta_nothink"] = f.delta_nothink;
        r["reward"] = stage1_reward(oc, f);
      } else if (stage == Stage::Stage2) {
        r["reward"] = stage2_reward(oc);
      } else {
        r["y"] = o.y;
        r["reward"] = stage3_reward(oc, o.y, p3);
      }
      out << r.dump() << "\n";
      return kOk;
    }

    // One outcome per line: {group_id, think, correct, length}.
    std::vector<Outcome> all;
    std::istringstream in(read_file(o.outcomes));
    std::string line;
    while (std::getline(in, line)) {
      if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
      const auto j = json::parse(line);
      all.push_back(Outcome{j.at("think").get<bool>(), j.at("correct").get<bool>(), j.value("length", std::int64_t{0}),
                            j.value("group_id", std::string("g")), 0});
    }
    std::size_t thinking = 0;
    for (const auto& x : all) thinking += x.think;
    const auto stats = BatchStats::from_counts(thinking, all.size());
    std::map<std::string, std::vector<std::size_t>> groups;
    for (std::size_t i = 0; i < all.size(); ++i) groups[all[i].group_id].push_back(i);
    std::vector<double> y(all.size(), 0.0);
    for (auto& [gid, idx] : groups) {
      std::vector<Outcome> g;
      for (auto i : idx) {
        g.push_back(all[i]);
        g.back().sample_id = g.size() - 1;
      }
      const auto ys = standardize_lengths(g);
      for (std::size_t k = 0; k < idx.size(); ++k) y[idx[k]] = ys[k];
    }
    for (std::size_t i = 0; i < all.size(); ++i) {
      double r = 0.0;
      if (stage == Stage::Stage1) r = stage1_reward(all[i], stats, p1);
      if (stage == Stage::Stage2) r = stage2_reward(all[i]);
      if (stage == Stage::Stage3) r = stage3_reward(all[i], y[i], p3);
      out << json{{"group_id", all[i].group_id}, {"reward", r}, {"y", y[i]}, {"z", stats.z}}.dump() << "\n";
    }
    return kOk;
  } catch (const std::exception& e) {
    log.error("reward-eval: {}", e.what());
    return kUsage;
  }
}

// ---- oracle-check ---------------------------------------------------------

int cmd_oracle_check(long long count, std::uint64_t seed, const std::string& fault_name, spdlog::logger& log,
                     std::ostream& out) {
  oracle::Fault fault = oracle::Fault::None;
  try {
    if (count < 1) throw std::invalid_argument("--count must be >= 1");
    fault = oracle::fault_from_string(fault_name);
  } catch (const std::exception& e) {
    log.error("oracle-check: {}", e.what());
    return kUsage;
  }
  const auto results = oracle::run_all(static_cast<std::size_t>(count), seed, fault);
  bool ok = true;
  for (const auto& r : results) {
    out << r.name << ": " << r.instances << " instances, worst error " << r.worst_error << " (tolerance "
        << r.tolerance << ") " << (r.passed() ? "ok" : "FAILED") << "\n";
    if (!r.passed()) {
      ok = false;
      out << "failing instance: " << json{{"oracle", r.name}, {"seed", seed}, {"instance", *r.failing_instance}}.dump()
          << "\n";
    }
  }
  return ok ? kOk : kOracleFailure;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  auto log = make_logger(err);

  CLI::App app{"AutoThink surrogate lab: reward laws, staged GRPO training, transcript analytics"};
  app.require_subcommand(1);

  CommonOptions train_opts, sweep_opts;
  std::uint64_t seed_value = 0;
  std::string grid_path;
  auto add_common = [&](CLI::App* sub, CommonOptions& o) {
    sub->add_option("--config", o.config, "experiment config (JSON)");
    sub->add_option("--out", o.out, "output directory (overrides config)");
    sub->add_option_function<std::uint64_t>("--seed", [&o](const std::uint64_t& s) { o.seed = s; },
                                            "seed (overrides config)");
  };
  auto* train = app.add_subcommand("train", "run the staged schedule");
  add_common(train, train_opts);
  auto* sweep_cmd = app.add_subcommand("sweep", "run the schedule over a parameter grid");
  add_common(sweep_cmd, sweep_opts);
  sweep_cmd->add_option("--grid", grid_path, "grid JSON (overrides config sweep_grid)");

  AnalyzeOptions analyze_opts;
  auto* analyze = app.add_subcommand("analyze", "summarize reasoning transcripts");
  analyze->add_option("transcripts", analyze_opts.transcripts, "transcripts JSONL")->required();
  analyze->add_option("--baselines", analyze_opts.baselines, "baseline summaries JSON");
  analyze->add_option("--lexicon", analyze_opts.lexicon, "keyword lexicon JSON");
  analyze->add_option("--out", analyze_opts.out, "output directory")->required();
  analyze->add_option("--tau", analyze_opts.tau, "no-think token threshold");
  analyze->add_option("--levels", analyze_opts.levels, "difficulty levels");
  analyze->add_flag("--quantile", analyze_opts.quantile, "quantile difficulty bins");

  RewardOptions reward_opts;
  auto* reward = app.add_subcommand("reward-eval", "evaluate a stage reward");
  reward->add_option("--stage", reward_opts.stage, "Stage1, Stage2 or Stage3");
  reward->add_option("--think", reward_opts.think);
  reward->add_option("--correct", reward_opts.correct);
  reward->add_option("--z", reward_opts.z, "batch thinking proportion");
  reward->add_option("--gamma", reward_opts.gamma);
  reward->add_option("--lambda", reward_opts.lambda);
  reward->add_option("--y", reward_opts.y, "standardized length");
  reward->add_option("--alpha", reward_opts.alpha);
  reward->add_option("--beta", reward_opts.beta);
  reward->add_option("--outcomes", reward_opts.outcomes, "JSONL outcomes; rewards per line");

  long long count = 1000;
  std::string fault = "none";
  auto* oracle_cmd = app.add_subcommand("oracle-check", "cross-check against reference implementations");
  oracle_cmd->add_option("--count", count, "instances per oracle");
  oracle_cmd->add_option("--seed", seed_value, "seed");
  oracle_cmd->add_option("--inject-fault", fault, "corrupt one implementation: advantage, reward or gradient");

  std::vector<std::string> argv_store{"autothink"};
  argv_store.insert(argv_store.end(), args.begin(), args.end());
  std::vector<char*> argv;
  for (auto& a : argv_store) argv.push_back(a.data());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << e.what() << "\n" << app.help();
    return kUsage;
  }

  try {
    if (*train) return cmd_train(train_opts, *log, out);
    if (*sweep_cmd) return cmd_sweep(sweep_opts, grid_path, *log, out);
    if (*analyze) return cmd_analyze(analyze_opts, *log, out);
    if (*reward) return cmd_reward_eval(reward_opts, *log, out);
    if (*oracle_cmd) return cmd_oracle_check(count, seed_value, fault, *log, out);
  } catch (const std::exception& e) {
    log->error("{}", e.what());
    return kInternal;
  }
  return kUsage;
}

}  // namespace autothink::cli
