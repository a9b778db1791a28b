#include "autothink/trainer.h"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <thread>

namespace autothink {

std::string to_string(Stage stage) {
  switch (stage) {
    case Stage::Stage1: return "Stage1";
    case Stage::Stage2: return "Stage2";
    case Stage::Stage3: return "Stage3";
  }
  return "Stage1";
}

std::string to_string(RewardLaw law) {
  switch (law) {
    case RewardLaw::BatchBalanced: return "batch_balanced";
    case RewardLaw::Naive: return "naive";
    case RewardLaw::LengthAware: return "length_aware";
  }
  return "naive";
}

Stage stage_from_string(const std::string& name) {
  if (name == "Stage1") return Stage::Stage1;
  if (name == "Stage2") return Stage::Stage2;
  if (name == "Stage3") return Stage::Stage3;
  throw std::invalid_argument("unknown stage '" + name + "'");
}

RewardLaw reward_law_from_string(const std::string& name) {
  if (name == "batch_balanced") return RewardLaw::BatchBalanced;
  if (name == "naive") return RewardLaw::Naive;
  if (name == "length_aware") return RewardLaw::LengthAware;
  throw std::invalid_argument("unknown reward law '" + name + "'");
}

RewardLaw StageConfig::law() const {
  if (reward_law) return *reward_law;
  switch (stage) {
    case Stage::Stage1: return RewardLaw::BatchBalanced;
    case Stage::Stage2: return RewardLaw::Naive;
    case Stage::Stage3: return RewardLaw::LengthAware;
  }
  return RewardLaw::Naive;
}

void StageConfig::validate() const {
  if (steps < 1) throw std::invalid_argument("stage: steps must be >= 1");
  if (batch_groups < 1) throw std::invalid_argument("stage: batch_groups must be >= 1");
  if (group_size < 2) throw std::invalid_argument("stage: group_size must be >= 2");
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) {
    throw std::invalid_argument("stage: learning_rate must be positive");
  }
  clip.validate();
  const RewardLaw l = law();
  if (l == RewardLaw::BatchBalanced) stage1.validate();
  if (l == RewardLaw::LengthAware) stage3.validate();
}

std::vector<double> shaped_rewards(std::span<const Outcome> group, RewardLaw law, const StageConfig& cfg,
                                   const BatchStats& stats) {
  std::vector<double> rewards(group.size());
  switch (law) {
    case RewardLaw::BatchBalanced: {
      const auto factors = penalty_factors(stats, cfg.stage1);
      for (std::size_t i = 0; i < group.size(); ++i) rewards[i] = stage1_reward(group[i], factors);
      break;
    }
    case RewardLaw::Naive:
      for (std::size_t i = 0; i < group.size(); ++i) rewards[i] = stage2_reward(group[i]);
      break;
    case RewardLaw::LengthAware: {
      const auto y = standardize_lengths(group);
      for (std::size_t i = 0; i < group.size(); ++i) rewards[i] = stage3_reward(group[i], y[i], cfg.stage3);
      break;
    }
  }
  return rewards;
}

namespace {

RolloutGroup collect_group(const SurrogatePolicy& policy, const EnvParams& env, const StageConfig& cfg,
                           const RunOptions& options, std::uint64_t stage_index, std::int64_t step,
                           std::size_t g) {
  Rng rng = make_stream(options.seed, stage_index + 1, static_cast<std::uint64_t>(step), g);
  const ProblemSpec problem = sample_problem(rng, env);
  RolloutGroup group;
  group.query_id = "s" + std::to_string(stage_index) + ":" + std::to_string(step) + ":" + std::to_string(g);
  group.samples.reserve(static_cast<std::size_t>(cfg.group_size));
  for (int i = 0; i < cfg.group_size; ++i) {
    Trajectory t = rollout(policy, problem, env, rng);
    t.outcome.group_id = group.query_id;
    t.outcome.sample_id = static_cast<std::size_t>(i);
    group.samples.push_back(std::move(t));
  }
  return group;
}

std::vector<RolloutGroup> collect_batch(const SurrogatePolicy& policy, const EnvParams& env,
                                        const StageConfig& cfg, const RunOptions& options,
                                        std::uint64_t stage_index, std::int64_t step) {
  const auto n = static_cast<std::size_t>(cfg.batch_groups);
  std::vector<RolloutGroup> groups(n);
  const unsigned workers = std::max(1u, std::min<unsigned>(options.workers, static_cast<unsigned>(n)));
  if (workers == 1) {
    for (std::size_t g = 0; g < n; ++g) groups[g] = collect_group(policy, env, cfg, options, stage_index, step, g);
    return groups;
  }
  // Streams are keyed by group index, so the partition does not affect results.
  std::vector<std::jthread> pool;
  for (unsigned w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      for (std::size_t g = w; g < n; g += workers) {
        groups[g] = collect_group(policy, env, cfg, options, stage_index, step, g);
      }
    });
  }
  pool.clear();
  return groups;
}

TrainLogRecord summarize_step(std::int64_t step, Stage stage, const std::vector<RolloutGroup>& groups,
                              std::size_t buckets) {
  TrainLogRecord rec;
  rec.step = step;
  rec.stage = stage;
  std::size_t total = 0, thinking = 0, correct = 0;
  double reward_sum = 0.0, length_sum = 0.0, correct_length_sum = 0.0;
  std::vector<std::size_t> bucket_total(buckets, 0), bucket_think(buckets, 0);
  for (const auto& g : groups) {
    for (std::size_t i = 0; i < g.size(); ++i) {
      const auto& o = g.samples[i].outcome;
      ++total;
      thinking += o.think;
      reward_sum += g.rewards[i];
      length_sum += static_cast<double>(o.length);
      if (o.correct) {
        ++correct;
        correct_length_sum += static_cast<double>(o.length);
      }
      const std::size_t b = g.samples[i].problem.bucket;
      ++bucket_total[b];
      bucket_think[b] += o.think;
    }
  }
  const double n = static_cast<double>(total);
  rec.thinking_rate = static_cast<double>(thinking) / n;
  rec.mean_reward = reward_sum / n;
  rec.accuracy = static_cast<double>(correct) / n;
  rec.mean_length = length_sum / n;
  rec.mean_length_correct = correct > 0 ? correct_length_sum / static_cast<double>(correct) : 0.0;
  rec.per_bucket_thinking_rate.resize(buckets, 0.0);
  for (std::size_t b = 0; b < buckets; ++b) {
    // Buckets absent from this batch report 0; consumers should not read them as a rate.
    if (bucket_total[b] > 0) {
      rec.per_bucket_thinking_rate[b] =
          static_cast<double>(bucket_think[b]) / static_cast<double>(bucket_total[b]);
    }
  }
  return rec;
}

}  // namespace

StageResult run_stage(const SurrogatePolicy& policy, const EnvParams& env, const StageConfig& cfg,
                      const RunOptions& options, std::uint64_t stage_index, std::int64_t step_offset) {
  cfg.validate();
  env.validate();
  if (policy.buckets() != env.buckets || policy.bins() != env.length_bins()) {
    throw std::invalid_argument("run_stage: policy shape does not match the environment");
  }

  StageResult result{policy, {}};
  result.log.reserve(static_cast<std::size_t>(cfg.steps));
  const RewardLaw law = cfg.law();

  for (int s = 0; s < cfg.steps; ++s) {
    const std::int64_t step = step_offset + s + 1;
    auto groups = collect_batch(result.policy, env, cfg, options, stage_index, step);

    std::size_t total = 0, thinking = 0;
    for (const auto& g : groups) {
      for (const auto& t : g.samples) {
        ++total;
        thinking += t.outcome.think;
      }
    }
    const BatchStats stats = BatchStats::from_counts(thinking, total);

    std::vector<std::vector<double>> advantages;
    advantages.reserve(groups.size());
    std::vector<Outcome> outcomes;
    for (auto& g : groups) {
      outcomes.clear();
      for (const auto& t : g.samples) outcomes.push_back(t.outcome);
      g.rewards = shaped_rewards(outcomes, law, cfg, stats);
      advantages.push_back(group_advantage(g.rewards, cfg.advantage));
    }

    result.log.push_back(summarize_step(step, cfg.stage, groups, env.buckets));
    try {
      result.policy = policy_gradient_step(result.policy, groups, advantages, cfg.clip, cfg.learning_rate);
    } catch (const DivergenceError& e) {
      throw StageDivergence(e.what(), result.policy, result.log);
    }
  }
  return result;
}

PipelineResult run_pipeline(const std::vector<StageConfig>& schedule, const EnvParams& env,
                            const SurrogatePolicy& initial, const RunOptions& options, const CheckpointSink& sink) {
  if (schedule.empty()) throw std::invalid_argument("pipeline: schedule must not be empty");
  for (const auto& cfg : schedule) cfg.validate();

  PipelineResult result{initial, {}, {}};
  for (std::size_t i = 0; i < schedule.size(); ++i) {
    const auto step_offset = static_cast<std::int64_t>(result.log.size());
    StageResult stage;
    try {
      stage = run_stage(result.policy, env, schedule[i], options, i, step_offset);
    } catch (const StageDivergence& e) {
      auto log = result.log;
      log.insert(log.end(), e.log().begin(), e.log().end());
      throw StageDivergence(e.what(), e.last_valid(), std::move(log));
    }
    result.policy = std::move(stage.policy);
    result.log.insert(result.log.end(), stage.log.begin(), stage.log.end());
    Checkpoint ckpt{i, schedule[i].stage, static_cast<std::int64_t>(result.log.size()), result.policy};
    if (sink) sink(ckpt);
    result.checkpoints.push_back(std::move(ckpt));
  }
  return result;
}

std::vector<StageConfig> default_schedule() {
  StageConfig s1;
  s1.stage = Stage::Stage1;
  s1.steps = 500;
  StageConfig s2 = s1;
  s2.stage = Stage::Stage2;
  StageConfig s3 = s1;
  s3.stage = Stage::Stage3;
  s3.steps = 200;
  s3.learning_rate = kDefaultStage3LearningRate;
  return {s1, s2, s3};
}

std::vector<std::map<std::string, double>> SweepGrid::points() const {
  std::vector<std::map<std::string, double>> out{{}};
  for (const auto& [name, values] : axes) {
    if (values.empty()) throw std::invalid_argument("sweep grid: axis '" + name + "' has no values");
    std::vector<std::map<std::string, double>> next;
    for (const auto& partial : out) {
      for (double v : values) {
        auto p = partial;
        p[name] = v;
        next.push_back(std::move(p));
      }
    }
    out = std::move(next);
  }
  return out;
}

void apply_parameter(const std::string& name, double value, std::vector<StageConfig>& schedule, EnvParams& env) {
  if (name == "gamma") {
    for (auto& s : schedule) s.stage1.gamma = value;
  } else if (name == "lambda") {
    for (auto& s : schedule) s.stage1.lambda = value;
  } else if (name == "alpha") {
    for (auto& s : schedule) s.stage3.alpha = value;
  } else if (name == "beta") {
    for (auto& s : schedule) s.stage3.beta = value;
  } else if (name == "learning_rate") {
    for (auto& s : schedule) s.learning_rate = value;
  } else if (name == "kappa_think") {
    env.kappa_think = value;
  } else if (name == "kappa_nothink") {
    env.kappa_nothink = value;
  } else if (name == "len_spread") {
    env.len_spread = value;
  } else {
    throw std::invalid_argument("unknown sweep parameter '" + name + "'");
  }
}

double trailing_mean(const std::vector<TrainLogRecord>& log, std::size_t end, std::size_t window,
                     double TrainLogRecord::*field) {
  end = std::min(end, log.size());
  const std::size_t begin = end > window ? end - window : 0;
  if (end == begin) return 0.0;
  double sum = 0.0;
  for (std::size_t i = begin; i < end; ++i) sum += log[i].*field;
  return sum / static_cast<double>(end - begin);
}

SweepReport sweep(const std::vector<StageConfig>& base_schedule, const SweepGrid& grid, const EnvParams& env,
                  const SurrogatePolicy& initial, const RunOptions& options, const SweepOptions& sweep_options) {
  if (grid.axes.empty()) throw std::invalid_argument("sweep: grid must not be empty");
  for (const auto& [name, values] : grid.axes) {
    std::vector<StageConfig> probe = base_schedule;
    EnvParams probe_env = env;
    apply_parameter(name, values.empty() ? 0.0 : values.front(), probe, probe_env);
  }

  SweepReport report;
  for (const auto& params : grid.points()) {
    SweepPointResult point;
    point.params = params;
    try {
      auto schedule = base_schedule;
      EnvParams point_env = env;
      for (const auto& [name, value] : params) apply_parameter(name, value, schedule, point_env);
      const auto run = run_pipeline(schedule, point_env, initial, options);
      const auto& log = run.log;

      std::vector<std::int64_t> marks = sweep_options.checkpoint_steps;
      if (marks.empty()) {
        for (const auto& c : run.checkpoints) marks.push_back(c.step);
      }
      for (auto m : marks) {
        const auto end = static_cast<std::size_t>(std::clamp<std::int64_t>(m, 0, static_cast<std::int64_t>(log.size())));
        point.thinking_rate_at.emplace_back(m, trailing_mean(log, end, sweep_options.window,
                                                             &TrainLogRecord::thinking_rate));
      }
      point.steady_thinking_rate =
          trailing_mean(log, log.size(), sweep_options.window, &TrainLogRecord::thinking_rate);
      point.final_mean_length = trailing_mean(log, log.size(), sweep_options.window, &TrainLogRecord::mean_length);
      point.final_accuracy = trailing_mean(log, log.size(), sweep_options.window, &TrainLogRecord::accuracy);
      const std::size_t stride = std::max<std::size_t>(1, sweep_options.trajectory_stride);
      for (std::size_t i = stride - 1; i < log.size(); i += stride) {
        point.length_trajectory.emplace_back(log[i].step, log[i].mean_length);
      }
      point.ok = true;
    } catch (const std::exception& e) {
      point.ok = false;
      point.error = e.what();
    }
    report.points.push_back(std::move(point));
  }
  return report;
}

}  // namespace autothink
