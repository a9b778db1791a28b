#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace autothink {

/// One sampled response, reduced to what the reward laws look at.
struct Outcome {
  bool think = false;
  bool correct = false;
  std::int64_t length = 0;  // tokens, >= 0
  std::string group_id;
  std::size_t sample_id = 0;
};

/// Batch-wide thinking proportion. `z * batch_size` is integral.
struct BatchStats {
  double z = 0.0;
  std::size_t batch_size = 1;

  /// Builds stats from a count of thinking samples.
  static BatchStats from_counts(std::size_t thinking, std::size_t total);
  void validate() const;
};

struct Stage1Params {
  double gamma = 0.5;   // target balance ratio, (0, 1)
  double lambda = 2.0;  // penalty slope, >= 0
  void validate() const;
};

struct Stage3Params {
  double alpha = 0.05;  // decay rate for correct responses
  double beta = 0.05;   // growth rate for incorrect responses
  void validate() const;
};

struct PenaltyFactors {
  double delta_think = 0.0;
  double delta_nothink = 0.0;
};

/// +1 think/correct, 0 think/wrong, +2 direct/correct, -1 direct/wrong.
double naive_reward(const Outcome& outcome);
double naive_reward(bool think, bool correct);

/// Soft penalty factors from the batch thinking proportion. Each factor is
/// min(1, max(0, (share - gamma) * lambda)) where share is z for thinking
/// and 1 - z for no-thinking.
PenaltyFactors penalty_factors(const BatchStats& stats, const Stage1Params& params);

/// Batch-balanced reward. Incorrect samples are pulled toward the anchors
/// -1 (thinking) and -2 (no-thinking) as their penalty factor grows.
double stage1_reward(const Outcome& outcome, const PenaltyFactors& factors);
double stage1_reward(const Outcome& outcome, const BatchStats& stats,
                     const Stage1Params& params);

/// Free-evolution stage: plain naive reward.
double stage2_reward(const Outcome& outcome);

/// Lengths z-scored within each (group, correctness) cohort, population std.
/// Singleton cohorts and zero-variance cohorts map to 0. The result is
/// index-aligned with the input. All outcomes must share a group id.
std::vector<double> standardize_lengths(std::span<const Outcome> outcomes);

/// Length shaping term added on top of the naive reward in stage 3.
double length_shaping(bool correct, double y, const Stage3Params& params);

double stage3_reward(const Outcome& outcome, double y, const Stage3Params& params);

}  // namespace autothink
