#include "autothink/grpo.h"

#include <algorithm>
#include <cmath>

namespace autothink {

void ClipConfig::validate() const {
  if (!(epsilon > 0.0 && epsilon < 1.0)) throw std::invalid_argument("clip: epsilon must lie in (0, 1)");
}

void RolloutGroup::validate() const {
  if (samples.size() < 2) throw std::invalid_argument("rollout group: degenerate group");
  if (rewards.size() != samples.size()) throw std::invalid_argument("rollout group: reward count mismatch");
  for (const auto& s : samples) {
    if (s.decision_logprobs.empty()) throw std::invalid_argument("rollout group: sample without decisions");
  }
}

std::vector<double> group_advantage(std::span<const double> rewards, AdvantageMode mode) {
  if (rewards.size() < 2) throw std::invalid_argument("degenerate group");
  const double n = static_cast<double>(rewards.size());
  double mean = 0.0;
  for (double r : rewards) mean += r;
  mean /= n;
  double ss = 0.0;
  for (double r : rewards) ss += (r - mean) * (r - mean);
  const double sigma = std::sqrt(ss / n);

  std::vector<double> adv(rewards.size());
  for (std::size_t i = 0; i < rewards.size(); ++i) {
    const double centred = rewards[i] - mean;
    adv[i] = mode == AdvantageMode::ZScore ? centred / (sigma + kAdvantageEpsilon) : centred;
  }
  // Constant groups carry no signal; rounding in the mean must not leak one.
  const bool constant = std::all_of(rewards.begin(), rewards.end(), [&](double r) { return r == rewards[0]; });
  if (constant || sigma == 0.0) std::fill(adv.begin(), adv.end(), 0.0);
  return adv;
}

double clipped_objective(double ratio, double advantage, const ClipConfig& cfg) {
  if (!(ratio > 0.0)) throw std::invalid_argument("invalid importance ratio");
  const double clipped = std::clamp(ratio, 1.0 - cfg.epsilon, 1.0 + cfg.epsilon);
  return std::min(ratio * advantage, clipped * advantage);
}

namespace {

void check_shapes(std::span<const RolloutGroup> groups, std::span<const std::vector<double>> advantages) {
  if (advantages.size() != groups.size()) throw std::invalid_argument("batch objective: advantage shape mismatch");
  for (std::size_t g = 0; g < groups.size(); ++g) {
    groups[g].validate();
    if (advantages[g].size() != groups[g].size()) {
      throw std::invalid_argument("batch objective: advantage shape mismatch");
    }
  }
}

std::size_t total_decisions(std::span<const RolloutGroup> groups) {
  std::size_t n = 0;
  for (const auto& g : groups) {
    for (std::size_t i = 0; i < g.size(); ++i) n += g.decision_count(i);
  }
  return n;
}

// Whether the unclipped branch carries the gradient at this ratio.
bool gradient_flows(double ratio, double advantage, double eps) {
  if (advantage > 0.0) return ratio <= 1.0 + eps;
  if (advantage < 0.0) return ratio >= 1.0 - eps;
  return false;
}

}  // namespace

double batch_objective(std::span<const RolloutGroup> groups, const DecisionLogprobs& new_logprobs,
                       std::span<const std::vector<double>> advantages, const ClipConfig& cfg) {
  check_shapes(groups, advantages);
  if (new_logprobs.size() != groups.size()) throw std::invalid_argument("batch objective: logprob shape mismatch");
  double sum = 0.0;
  for (std::size_t g = 0; g < groups.size(); ++g) {
    const auto& group = groups[g];
    if (new_logprobs[g].size() != group.size()) {
      throw std::invalid_argument("batch objective: logprob shape mismatch");
    }
    for (std::size_t i = 0; i < group.size(); ++i) {
      const auto& old_lp = group.samples[i].decision_logprobs;
      const auto& new_lp = new_logprobs[g][i];
      if (new_lp.size() != old_lp.size()) throw std::invalid_argument("batch objective: logprob shape mismatch");
      for (std::size_t t = 0; t < old_lp.size(); ++t) {
        sum += clipped_objective(std::exp(new_lp[t] - old_lp[t]), advantages[g][i], cfg);
      }
    }
  }
  return sum / static_cast<double>(total_decisions(groups));
}

double batch_objective(std::span<const RolloutGroup> groups, const SurrogatePolicy& policy,
                       std::span<const std::vector<double>> advantages, const ClipConfig& cfg) {
  DecisionLogprobs lp(groups.size());
  for (std::size_t g = 0; g < groups.size(); ++g) {
    for (const auto& s : groups[g].samples) lp[g].push_back(decision_logprobs(policy, s));
  }
  return batch_objective(groups, lp, advantages, cfg);
}

std::vector<double> policy_gradient(std::span<const RolloutGroup> groups, const SurrogatePolicy& policy,
                                    std::span<const std::vector<double>> advantages,
                                    const ClipConfig& cfg) {
  check_shapes(groups, advantages);
  const std::size_t buckets = policy.buckets();
  const std::size_t bins = policy.bins();
  std::vector<double> grad(policy.parameter_count(), 0.0);
  const double norm = 1.0 / static_cast<double>(total_decisions(groups));

  for (std::size_t g = 0; g < groups.size(); ++g) {
    for (std::size_t i = 0; i < groups[g].size(); ++i) {
      const auto& s = groups[g].samples[i];
      const double adv = advantages[g][i];
      if (adv == 0.0) continue;
      const std::size_t b = s.problem.bucket;
      const auto new_lp = decision_logprobs(policy, s);
      if (new_lp.size() != s.decision_logprobs.size()) {
        throw std::invalid_argument("policy gradient: logprob shape mismatch");
      }

      // d/dθ [r A] = A r ∇log π, where the unclipped branch is active.
      const double mode_ratio = std::exp(new_lp[0] - s.decision_logprobs[0]);
      if (gradient_flows(mode_ratio, adv, cfg.epsilon)) {
        const double score = (s.mode_chosen ? 1.0 : 0.0) - policy.think_probability(b);
        grad[b] += norm * adv * mode_ratio * score;
      }
      if (s.mode_chosen) {
        const double bin_ratio = std::exp(new_lp[1] - s.decision_logprobs[1]);
        if (gradient_flows(bin_ratio, adv, cfg.epsilon)) {
          const auto probs = policy.bin_probabilities(b);
          for (std::size_t k = 0; k < bins; ++k) {
            const double score = (k == *s.length_bin ? 1.0 : 0.0) - probs[k];
            grad[buckets + b * bins + k] += norm * adv * bin_ratio * score;
          }
        }
      }
    }
  }
  return grad;
}

SurrogatePolicy policy_gradient_step(const SurrogatePolicy& policy, std::span<const RolloutGroup> groups,
                                     std::span<const std::vector<double>> advantages,
                                     const ClipConfig& cfg, double learning_rate) {
  if (!(learning_rate > 0.0)) throw std::invalid_argument("policy step: learning_rate must be positive");
  const auto grad = policy_gradient(groups, policy, advantages, cfg);
  SurrogatePolicy next = policy;
  for (std::size_t j = 0; j < grad.size(); ++j) {
    if (!std::isfinite(grad[j])) throw DivergenceError("diverged");
    next.parameter(j) += learning_rate * grad[j];
  }
  if (!next.finite()) throw DivergenceError("diverged");
  return next;
}

}  // namespace autothink
