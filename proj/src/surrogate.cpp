#include "autothink/surrogate.h"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace autothink {

Rng make_stream(std::uint64_t seed, std::uint64_t a, std::uint64_t b, std::uint64_t c) {
  auto lo = [](std::uint64_t v) { return static_cast<std::uint32_t>(v & 0xffffffffu); };
  auto hi = [](std::uint64_t v) { return static_cast<std::uint32_t>(v >> 32); };
  std::seed_seq seq{lo(seed), hi(seed), lo(a), hi(a), lo(b), hi(b), lo(c), hi(c)};
  return Rng(seq);
}

void DifficultyDistribution::validate() const {
  if (kind == Kind::Uniform) {
    if (!(low >= 0.0 && high <= 1.0 && low <= high)) {
      throw std::invalid_argument("difficulty: uniform bounds must satisfy 0 <= low <= high <= 1");
    }
  } else if (!(a > 0.0 && b > 0.0)) {
    throw std::invalid_argument("difficulty: beta shapes must be positive");
  }
}

double EnvParams::bin_center(std::size_t bin) const {
  return static_cast<double>(base_len_think) * length_bin_scales.at(bin);
}

double EnvParams::p_correct(bool think, double d) const {
  const double kappa = think ? kappa_think : kappa_nothink;
  return std::clamp(1.0 - kappa * d, 0.0, 1.0);
}

void EnvParams::validate() const {
  if (!(kappa_think >= 0.0)) throw std::invalid_argument("env: kappa_think must be >= 0");
  if (!(kappa_nothink >= 0.0)) throw std::invalid_argument("env: kappa_nothink must be >= 0");
  if (!(kappa_nothink > kappa_think)) {
    throw std::invalid_argument("env: kappa_nothink must exceed kappa_think");
  }
  if (base_len_think <= 0 || base_len_nothink <= 0) {
    throw std::invalid_argument("env: base lengths must be positive");
  }
  if (!(len_spread >= 0.0)) throw std::invalid_argument("env: len_spread must be >= 0");
  if (buckets == 0) throw std::invalid_argument("env: buckets must be positive");
  if (length_bin_scales.empty()) throw std::invalid_argument("env: at least one length bin required");
  for (double s : length_bin_scales) {
    if (!(s > 0.0)) throw std::invalid_argument("env: length bin scales must be positive");
  }
  difficulty.validate();
}

std::size_t bucket_of(double difficulty, std::size_t buckets) {
  if (buckets == 0) throw std::invalid_argument("bucket_of: buckets must be positive");
  const double scaled = std::floor(std::clamp(difficulty, 0.0, 1.0) * static_cast<double>(buckets));
  return std::min(static_cast<std::size_t>(scaled), buckets - 1);
}

SurrogatePolicy::SurrogatePolicy(std::size_t buckets, std::size_t bins, double think_logit,
                                 double length_logit)
    : bins_(bins), think_logits_(buckets, think_logit), length_logits_(buckets * bins, length_logit) {
  if (buckets == 0 || bins == 0) throw std::invalid_argument("policy: buckets and bins must be positive");
}

namespace {

double log_sigmoid(double x) {
  // log(1 / (1 + e^-x)) without overflow for large |x|
  return x >= 0.0 ? -std::log1p(std::exp(-x)) : x - std::log1p(std::exp(x));
}

}  // namespace

double SurrogatePolicy::think_probability(std::size_t bucket) const {
  const double x = think_logit(bucket);
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

std::vector<double> SurrogatePolicy::bin_probabilities(std::size_t bucket) const {
  std::vector<double> p(bins_);
  double peak = length_logit(bucket, 0);
  for (std::size_t k = 1; k < bins_; ++k) peak = std::max(peak, length_logit(bucket, k));
  double total = 0.0;
  for (std::size_t k = 0; k < bins_; ++k) {
    p[k] = std::exp(length_logit(bucket, k) - peak);
    total += p[k];
  }
  for (double& v : p) v /= total;
  return p;
}

double SurrogatePolicy::mode_logprob(std::size_t bucket, bool think) const {
  const double x = think_logit(bucket);
  return think ? log_sigmoid(x) : log_sigmoid(-x);
}

double SurrogatePolicy::bin_logprob(std::size_t bucket, std::size_t bin) const {
  double peak = length_logit(bucket, 0);
  for (std::size_t k = 1; k < bins_; ++k) peak = std::max(peak, length_logit(bucket, k));
  double total = 0.0;
  for (std::size_t k = 0; k < bins_; ++k) total += std::exp(length_logit(bucket, k) - peak);
  return length_logit(bucket, bin) - peak - std::log(total);
}

double& SurrogatePolicy::parameter(std::size_t index) {
  if (index < think_logits_.size()) return think_logits_[index];
  return length_logits_.at(index - think_logits_.size());
}

double SurrogatePolicy::parameter(std::size_t index) const {
  if (index < think_logits_.size()) return think_logits_[index];
  return length_logits_.at(index - think_logits_.size());
}

bool SurrogatePolicy::finite() const {
  auto ok = [](double v) { return std::isfinite(v); };
  return std::all_of(think_logits_.begin(), think_logits_.end(), ok) &&
         std::all_of(length_logits_.begin(), length_logits_.end(), ok);
}

ProblemSpec sample_problem(Rng& rng, const EnvParams& env) {
  double d = 0.0;
  if (env.difficulty.kind == DifficultyDistribution::Kind::Uniform) {
    d = std::uniform_real_distribution<double>(env.difficulty.low, env.difficulty.high)(rng);
  } else {
    const double x = std::gamma_distribution<double>(env.difficulty.a, 1.0)(rng);
    const double y = std::gamma_distribution<double>(env.difficulty.b, 1.0)(rng);
    d = x / (x + y);
  }
  d = std::clamp(d, 0.0, 1.0);
  return ProblemSpec{d, bucket_of(d, env.buckets)};
}

Trajectory rollout(const SurrogatePolicy& policy, const ProblemSpec& problem, const EnvParams& env,
                   Rng& rng) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  Trajectory t;
  t.problem = problem;

  const std::size_t b = problem.bucket;
  t.mode_chosen = unit(rng) < policy.think_probability(b);
  t.decision_logprobs.push_back(policy.mode_logprob(b, t.mode_chosen));

  double base = static_cast<double>(env.base_len_nothink);
  if (t.mode_chosen) {
    const auto probs = policy.bin_probabilities(b);
    const std::size_t bin = std::discrete_distribution<std::size_t>(probs.begin(), probs.end())(rng);
    t.length_bin = bin;
    t.decision_logprobs.push_back(policy.bin_logprob(b, bin));
    base = env.bin_center(bin) * (1.0 + problem.difficulty);
  }

  t.outcome.think = t.mode_chosen;
  t.outcome.correct = unit(rng) < env.p_correct(t.mode_chosen, problem.difficulty);
  double noise = 1.0;
  if (env.len_spread > 0.0) noise = std::lognormal_distribution<double>(0.0, env.len_spread)(rng);
  t.outcome.length = std::max<std::int64_t>(1, std::llround(base * noise));
  return t;
}

std::vector<double> decision_logprobs(const SurrogatePolicy& policy, const Trajectory& t) {
  std::vector<double> out{policy.mode_logprob(t.problem.bucket, t.mode_chosen)};
  if (t.mode_chosen) {
    if (!t.length_bin) throw std::invalid_argument("trajectory: thinking sample without a length bin");
    out.push_back(policy.bin_logprob(t.problem.bucket, *t.length_bin));
  }
  return out;
}

GapLaw GapLaw::balanced(const BatchStats& stats, const Stage1Params& params) {
  return GapLaw{Kind::Balanced, penalty_factors(stats, params)};
}

double expected_reward_gap(const EnvParams& env, const GapLaw& law, double difficulty) {
  if (!(difficulty >= 0.0 && difficulty <= 1.0)) {
    throw std::invalid_argument("expected_reward_gap: difficulty must lie in [0, 1]");
  }
  auto reward = [&](bool think, bool correct) {
    const Outcome o{think, correct, 0, {}, 0};
    return law.kind == GapLaw::Kind::Naive ? naive_reward(o) : stage1_reward(o, law.factors);
  };
  auto expected = [&](bool think) {
    const double p = env.p_correct(think, difficulty);
    return p * reward(think, true) + (1.0 - p) * reward(think, false);
  };
  return expected(true) - expected(false);
}

}  // namespace autothink
