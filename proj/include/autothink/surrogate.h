#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <vector>

#include "autothink/reward.h"

namespace autothink {

using Rng = std::mt19937_64;

/// Independent stream for (seed, a, b, c). Rollout workers key streams by
/// stage, step and group so results do not depend on the worker count.
Rng make_stream(std::uint64_t seed, std::uint64_t a = 0, std::uint64_t b = 0, std::uint64_t c = 0);

struct DifficultyDistribution {
  enum class Kind { Uniform, Beta };
  Kind kind = Kind::Uniform;
  double low = 0.0;  // uniform bounds
  double high = 1.0;
  double a = 1.0;    // beta shape
  double b = 1.0;
  void validate() const;
};

struct EnvParams {
  double kappa_think = 0.6;
  double kappa_nothink = 1.4;
  std::int64_t base_len_think = 3000;
  std::int64_t base_len_nothink = 600;
  double len_spread = 0.25;
  std::size_t buckets = 8;
  /// Thinking length bins as multiples of base_len_think. The defaults give
  /// bin centres 1500 / 3000 / 6000 / 12000.
  std::vector<double> length_bin_scales{0.5, 1.0, 2.0, 4.0};
  DifficultyDistribution difficulty;

  std::size_t length_bins() const { return length_bin_scales.size(); }
  double bin_center(std::size_t bin) const;
  double p_correct(bool think, double difficulty) const;
  void validate() const;
};

struct ProblemSpec {
  double difficulty = 0.0;
  std::size_t bucket = 0;
};

std::size_t bucket_of(double difficulty, std::size_t buckets);

/// Per-bucket Bernoulli mode choice and categorical length-bin choice.
class SurrogatePolicy {
 public:
  SurrogatePolicy() = default;
  SurrogatePolicy(std::size_t buckets, std::size_t bins, double think_logit = 0.0,
                  double length_logit = 0.0);

  std::size_t buckets() const { return think_logits_.size(); }
  std::size_t bins() const { return bins_; }

  double& think_logit(std::size_t bucket) { return think_logits_.at(bucket); }
  double think_logit(std::size_t bucket) const { return think_logits_.at(bucket); }
  double& length_logit(std::size_t bucket, std::size_t bin) { return length_logits_.at(bucket * bins_ + bin); }
  double length_logit(std::size_t bucket, std::size_t bin) const {
    return length_logits_.at(bucket * bins_ + bin);
  }

  std::span<double> think_logits() { return think_logits_; }
  std::span<const double> think_logits() const { return think_logits_; }
  std::span<double> length_logits() { return length_logits_; }
  std::span<const double> length_logits() const { return length_logits_; }

  double think_probability(std::size_t bucket) const;
  std::vector<double> bin_probabilities(std::size_t bucket) const;
  double mode_logprob(std::size_t bucket, bool think) const;
  double bin_logprob(std::size_t bucket, std::size_t bin) const;

  /// Number of scalar parameters; flat indexing puts think logits first.
  std::size_t parameter_count() const { return think_logits_.size() + length_logits_.size(); }
  double& parameter(std::size_t index);
  double parameter(std::size_t index) const;

  bool finite() const;

  friend bool operator==(const SurrogatePolicy&, const SurrogatePolicy&) = default;

 private:
  std::size_t bins_ = 0;
  std::vector<double> think_logits_;
  std::vector<double> length_logits_;
};

struct Trajectory {
  ProblemSpec problem;
  Outcome outcome;
  std::vector<double> decision_logprobs;  // mode, then length bin when thinking
  bool mode_chosen = false;               // true = thinking
  std::optional<std::size_t> length_bin;
};

ProblemSpec sample_problem(Rng& rng, const EnvParams& env);

Trajectory rollout(const SurrogatePolicy& policy, const ProblemSpec& problem, const EnvParams& env,
                   Rng& rng);

/// Log-density of the decisions recorded in `t` under `policy`.
std::vector<double> decision_logprobs(const SurrogatePolicy& policy, const Trajectory& t);

/// Reward law used by the closed-form collapse diagnostic.
struct GapLaw {
  enum class Kind { Naive, Balanced };
  Kind kind = Kind::Naive;
  PenaltyFactors factors;  // Balanced only

  static GapLaw naive() { return {}; }
  static GapLaw balanced(const BatchStats& stats, const Stage1Params& params);
};

/// E[r | think, d] - E[r | no-think, d].
double expected_reward_gap(const EnvParams& env, const GapLaw& law, double difficulty);

}  // namespace autothink
