#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "autothink/grpo.h"
#include "autothink/reward.h"
#include "autothink/surrogate.h"

namespace autothink {

enum class Stage { Stage1, Stage2, Stage3 };

inline constexpr double kDefaultLearningRate = 3.0;
// The length signal in stage 3 is small next to the correctness signal and
// the stage is short, so it gets a larger step.
inline constexpr double kDefaultStage3LearningRate = 10.0;

/// Reward law applied within a stage. Each stage has a default law; the
/// ablations swap it out (e.g. naive reward in the stage-1 slot).
enum class RewardLaw { BatchBalanced, Naive, LengthAware };

std::string to_string(Stage stage);
std::string to_string(RewardLaw law);
Stage stage_from_string(const std::string& name);
RewardLaw reward_law_from_string(const std::string& name);

struct StageConfig {
  Stage stage = Stage::Stage1;
  int steps = 1;
  int batch_groups = 64;
  int group_size = 8;
  std::optional<RewardLaw> reward_law;  // default follows `stage`
  Stage1Params stage1;
  Stage3Params stage3;
  double learning_rate = kDefaultLearningRate;
  ClipConfig clip;
  AdvantageMode advantage = AdvantageMode::ZScore;
  int context_length = 0;  // recorded for provenance only

  RewardLaw law() const;
  void validate() const;
};

struct TrainLogRecord {
  std::int64_t step = 0;
  Stage stage = Stage::Stage1;
  double thinking_rate = 0.0;
  double mean_reward = 0.0;
  double accuracy = 0.0;
  double mean_length = 0.0;
  double mean_length_correct = 0.0;
  std::vector<double> per_bucket_thinking_rate;

  friend bool operator==(const TrainLogRecord&, const TrainLogRecord&) = default;
};

struct RunOptions {
  std::uint64_t seed = 0;
  unsigned workers = 1;
};

/// Rewards for one group under `law`. `stats` is the batch-wide thinking
/// proportion; it only matters for the balanced law.
std::vector<double> shaped_rewards(std::span<const Outcome> group, RewardLaw law, const StageConfig& cfg,
                                   const BatchStats& stats);

struct StageResult {
  SurrogatePolicy policy;
  std::vector<TrainLogRecord> log;
};

/// Divergence inside a stage. Carries the last finite policy and the log up
/// to the failing step.
class StageDivergence : public DivergenceError {
 public:
  StageDivergence(const std::string& what, SurrogatePolicy last_valid, std::vector<TrainLogRecord> log)
      : DivergenceError(what), last_valid_(std::move(last_valid)), log_(std::move(log)) {}
  const SurrogatePolicy& last_valid() const { return last_valid_; }
  const std::vector<TrainLogRecord>& log() const { return log_; }

 private:
  SurrogatePolicy last_valid_;
  std::vector<TrainLogRecord> log_;
};

/// Runs `cfg.steps` updates. `stage_index` keys the RNG streams and
/// `step_offset` numbers the log records.
StageResult run_stage(const SurrogatePolicy& policy, const EnvParams& env, const StageConfig& cfg,
                      const RunOptions& options, std::uint64_t stage_index = 0, std::int64_t step_offset = 0);

struct Checkpoint {
  std::size_t stage_index = 0;
  Stage stage = Stage::Stage1;
  std::int64_t step = 0;
  SurrogatePolicy policy;
};

using CheckpointSink = std::function<void(const Checkpoint&)>;

struct PipelineResult {
  SurrogatePolicy policy;
  std::vector<TrainLogRecord> log;
  std::vector<Checkpoint> checkpoints;
};

/// Stages run in order with the policy carried forward; a checkpoint is
/// emitted to `sink` (if set) at every stage boundary.
PipelineResult run_pipeline(const std::vector<StageConfig>& schedule, const EnvParams& env,
                            const SurrogatePolicy& initial, const RunOptions& options,
                            const CheckpointSink& sink = {});

/// 500/500/200 steps, batch 64, G = 8, gamma 0.5, lambda 2, alpha = beta = 0.05.
std::vector<StageConfig> default_schedule();

/// Ordered parameter axes; the sweep visits the cartesian product.
struct SweepGrid {
  std::vector<std::pair<std::string, std::vector<double>>> axes;
  std::vector<std::map<std::string, double>> points() const;
};

struct SweepOptions {
  std::vector<std::int64_t> checkpoint_steps;  // empty: stage ends
  std::size_t window = 100;
  std::size_t trajectory_stride = 10;
};

struct SweepPointResult {
  std::map<std::string, double> params;
  bool ok = false;
  std::string error;
  std::vector<std::pair<std::int64_t, double>> thinking_rate_at;  // trailing-window means
  double steady_thinking_rate = 0.0;
  double final_mean_length = 0.0;
  double final_accuracy = 0.0;
  std::vector<std::pair<std::int64_t, double>> length_trajectory;
};

struct SweepReport {
  std::vector<SweepPointResult> points;
};

/// Applies one named parameter ("gamma", "lambda", "alpha", "beta",
/// "learning_rate", "kappa_think", "kappa_nothink", "len_spread") to a
/// schedule/env pair.
void apply_parameter(const std::string& name, double value, std::vector<StageConfig>& schedule, EnvParams& env);

SweepReport sweep(const std::vector<StageConfig>& base_schedule, const SweepGrid& grid, const EnvParams& env,
                  const SurrogatePolicy& initial, const RunOptions& options, const SweepOptions& sweep_options = {});

/// Mean of field over records (end - window, end], clipped at the start.
double trailing_mean(const std::vector<TrainLogRecord>& log, std::size_t end, std::size_t window,
                     double TrainLogRecord::*field);

}  // namespace autothink
