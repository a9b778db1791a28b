#pragma once

#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "autothink/surrogate.h"

namespace autothink {

/// Raised when an update produces non-finite parameters.
class DivergenceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr double kAdvantageEpsilon = 1e-6;

enum class AdvantageMode {
  ZScore,      // (r - mean) / (std + eps)
  MeanCenter,  // r - mean
};

struct ClipConfig {
  double epsilon = 0.2;
  void validate() const;
};

/// G rollouts for one query. Each sample's decisions stand in for tokens:
/// one mode decision, plus one length decision when thinking.
struct RolloutGroup {
  std::string query_id;
  std::vector<double> rewards;
  std::vector<Trajectory> samples;

  std::size_t size() const { return samples.size(); }
  std::size_t decision_count(std::size_t i) const { return samples.at(i).decision_logprobs.size(); }
  void validate() const;
};

/// Per-sample advantages, broadcast over that sample's decisions.
std::vector<double> group_advantage(std::span<const double> rewards,
                                    AdvantageMode mode = AdvantageMode::ZScore);

/// min(ratio * A, clip(ratio, 1 - eps, 1 + eps) * A).
double clipped_objective(double ratio, double advantage, const ClipConfig& cfg);

/// new_logprobs[g][i][t] mirrors groups[g].samples[i].decision_logprobs[t].
using DecisionLogprobs = std::vector<std::vector<std::vector<double>>>;

/// Token-normalised clipped objective over every decision in the batch.
double batch_objective(std::span<const RolloutGroup> groups, const DecisionLogprobs& new_logprobs,
                       std::span<const std::vector<double>> advantages, const ClipConfig& cfg);

/// Same objective with new log-probabilities evaluated under `policy`.
double batch_objective(std::span<const RolloutGroup> groups, const SurrogatePolicy& policy,
                       std::span<const std::vector<double>> advantages, const ClipConfig& cfg);

/// Analytic gradient of batch_objective with respect to the policy
/// parameters, laid out like the policy (think logits, then length logits).
std::vector<double> policy_gradient(std::span<const RolloutGroup> groups, const SurrogatePolicy& policy,
                                    std::span<const std::vector<double>> advantages,
                                    const ClipConfig& cfg);

/// One ascent step. Throws DivergenceError on a non-finite gradient or result.
SurrogatePolicy policy_gradient_step(const SurrogatePolicy& policy, std::span<const RolloutGroup> groups,
                                     std::span<const std::vector<double>> advantages,
                                     const ClipConfig& cfg, double learning_rate);

}  // namespace autothink
