#include "autothink/reward.h"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace autothink {

BatchStats BatchStats::from_counts(std::size_t thinking, std::size_t total) {
  if (total == 0) throw std::invalid_argument("batch stats: empty batch");
  if (thinking > total) throw std::invalid_argument("batch stats: thinking count exceeds batch size");
  return BatchStats{static_cast<double>(thinking) / static_cast<double>(total), total};
}

void BatchStats::validate() const {
  if (batch_size == 0) throw std::invalid_argument("batch stats: batch_size must be positive");
  if (!(z >= 0.0 && z <= 1.0)) throw std::invalid_argument("batch stats: z must lie in [0, 1]");
  const double scaled = z * static_cast<double>(batch_size);
  if (std::abs(scaled - std::round(scaled)) > 1e-9) {
    throw std::invalid_argument("batch stats: z * batch_size is not integral");
  }
}

void Stage1Params::validate() const {
  if (!(gamma > 0.0 && gamma < 1.0)) throw std::invalid_argument("stage1: gamma must lie in (0, 1)");
  if (!(lambda >= 0.0)) throw std::invalid_argument("stage1: lambda must be >= 0");
}

void Stage3Params::validate() const {
  if (!(alpha >= 0.0)) throw std::invalid_argument("stage3: alpha must be >= 0");
  if (!(beta >= 0.0)) throw std::invalid_argument("stage3: beta must be >= 0");
}

double naive_reward(bool think, bool correct) {
  if (think) return correct ? 1.0 : 0.0;
  return correct ? 2.0 : -1.0;
}

double naive_reward(const Outcome& outcome) { return naive_reward(outcome.think, outcome.correct); }

PenaltyFactors penalty_factors(const BatchStats& stats, const Stage1Params& params) {
  auto soft = [&](double share) {
    return std::min(1.0, std::max(0.0, (share - params.gamma) * params.lambda));
  };
  return PenaltyFactors{soft(stats.z), soft(1.0 - stats.z)};
}

double stage1_reward(const Outcome& outcome, const PenaltyFactors& factors) {
  const double naive = naive_reward(outcome);
  if (outcome.think) {
    const double d = factors.delta_think;
    return outcome.correct ? (1.0 - d) * naive : (1.0 - d) * naive + d * -1.0;
  }
  const double d = factors.delta_nothink;
  return outcome.correct ? (1.0 - d) * naive : (1.0 - d) * naive + d * -2.0;
}

double stage1_reward(const Outcome& outcome, const BatchStats& stats, const Stage1Params& params) {
  return stage1_reward(outcome, penalty_factors(stats, params));
}

double stage2_reward(const Outcome& outcome) { return naive_reward(outcome); }

namespace {

void standardize_cohort(std::span<const Outcome> outcomes, bool correct, std::vector<double>& out) {
  double sum = 0.0;
  std::size_t n = 0;
  for (const auto& o : outcomes) {
    if (o.correct != correct) continue;
    sum += static_cast<double>(o.length);
    ++n;
  }
  if (n < 2) return;
  const double mean = sum / static_cast<double>(n);
  double ss = 0.0;
  for (const auto& o : outcomes) {
    if (o.correct != correct) continue;
    const double d = static_cast<double>(o.length) - mean;
    ss += d * d;
  }
  const double sigma = std::sqrt(ss / static_cast<double>(n));
  if (sigma == 0.0) return;
  for (std::size_t i = 0; i < outcomes.size(); ++i) {
    if (outcomes[i].correct != correct) continue;
    out[i] = (static_cast<double>(outcomes[i].length) - mean) / sigma;
  }
}

}  // namespace

std::vector<double> standardize_lengths(std::span<const Outcome> outcomes) {
  std::vector<double> y(outcomes.size(), 0.0);
  if (outcomes.empty()) return y;
  for (const auto& o : outcomes) {
    if (o.group_id != outcomes.front().group_id) {
      throw std::invalid_argument("standardize_lengths: outcomes span more than one group");
    }
    if (o.length < 0) throw std::invalid_argument("standardize_lengths: negative length");
  }
  standardize_cohort(outcomes, true, y);
  standardize_cohort(outcomes, false, y);
  return y;
}

double length_shaping(bool correct, double y, const Stage3Params& params) {
  return correct ? -1.0 + std::exp(-params.alpha * y) : 1.0 - std::exp(-params.beta * y);
}

double stage3_reward(const Outcome& outcome, double y, const Stage3Params& params) {
  return naive_reward(outcome) + length_shaping(outcome.correct, y, params);
}

}  // namespace autothink
