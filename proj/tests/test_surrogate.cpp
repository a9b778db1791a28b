#include <doctest.h>

#include <cmath>

#include "autothink/surrogate.h"

using namespace autothink;

TEST_CASE("first draw for seed 42 is frozen") {
  Rng rng = make_stream(42);
  const auto p = sample_problem(rng, EnvParams{});
  CHECK(p.difficulty == 0.81384775991617131);
  CHECK(p.bucket == 6);
}

TEST_CASE("streams are reproducible and distinct") {
  Rng a = make_stream(7, 1, 2, 3), b = make_stream(7, 1, 2, 3), c = make_stream(7, 1, 2, 4);
  CHECK(a() == b());
  CHECK(make_stream(7, 1, 2, 3)() != c());
}

TEST_CASE("uniform difficulty mean") {
  Rng rng = make_stream(1);
  const EnvParams env;
  double sum = 0;
  for (int i = 0; i < 10000; ++i) sum += sample_problem(rng, env).difficulty;
  CHECK(sum / 10000 >= 0.48);
  CHECK(sum / 10000 <= 0.52);
}

TEST_CASE("beta difficulty stays in range") {
  EnvParams env;
  env.difficulty.kind = DifficultyDistribution::Kind::Beta;
  env.difficulty.a = 2.0;
  env.difficulty.b = 5.0;
  Rng rng = make_stream(2);
  double sum = 0;
  for (int i = 0; i < 10000; ++i) {
    const auto p = sample_problem(rng, env);
    REQUIRE(p.difficulty >= 0.0);
    REQUIRE(p.difficulty <= 1.0);
    sum += p.difficulty;
  }
  CHECK(sum / 10000 == doctest::Approx(2.0 / 7.0).epsilon(0.03));
}

TEST_CASE("bucket mapping") {
  CHECK(bucket_of(0.99, 8) == 7);
  CHECK(bucket_of(1.0, 8) == 7);
  CHECK(bucket_of(0.0, 8) == 0);
  CHECK(bucket_of(0.125, 8) == 1);
  CHECK_THROWS(bucket_of(0.5, 0));
}

TEST_CASE("correctness curves") {
  const EnvParams env;
  CHECK(env.p_correct(false, 0.9) == 0.0);
  CHECK(env.p_correct(true, 0.0) == 1.0);
  CHECK(env.p_correct(false, 0.0) == 1.0);
  for (int i = 0; i <= 100; ++i) {
    const double d = i / 100.0;
    CHECK(env.p_correct(true, d) >= env.p_correct(false, d));
  }
}

TEST_CASE("env validation") {
  EnvParams env;
  env.kappa_nothink = 0.5;
  CHECK_THROWS(env.validate());
  env = EnvParams{};
  env.length_bin_scales.clear();
  CHECK_THROWS(env.validate());
  env = EnvParams{};
  env.difficulty.low = 0.8;
  env.difficulty.high = 0.2;
  CHECK_THROWS(env.validate());
  CHECK(EnvParams{}.bin_center(3) == 12000.0);
  CHECK(EnvParams{}.bin_center(0) == 1500.0);
}

TEST_CASE("saturated think logit") {
  const EnvParams env;
  SurrogatePolicy policy(env.buckets, env.length_bins(), 20.0);
  Rng rng = make_stream(3);
  int thinking = 0;
  for (int i = 0; i < 10000; ++i) thinking += rollout(policy, sample_problem(rng, env), env, rng).mode_chosen;
  CHECK(thinking >= 9990);
}

TEST_CASE("recorded log-probabilities match the policy") {
  const EnvParams env;
  SurrogatePolicy policy(env.buckets, env.length_bins());
  Rng init = make_stream(4);
  std::normal_distribution<double> n(0.0, 1.5);
  for (std::size_t j = 0; j < policy.parameter_count(); ++j) policy.parameter(j) = n(init);
  Rng rng = make_stream(5);
  for (int i = 0; i < 2000; ++i) {
    const auto t = rollout(policy, sample_problem(rng, env), env, rng);
    REQUIRE(t.decision_logprobs.size() == (t.mode_chosen ? 2u : 1u));
    CHECK(t.length_bin.has_value() == t.mode_chosen);
    CHECK(t.outcome.length > 0);
    const auto again = decision_logprobs(policy, t);
    for (std::size_t k = 0; k < again.size(); ++k) CHECK(std::abs(again[k] - t.decision_logprobs[k]) <= 1e-12);
    double expect = std::log(t.mode_chosen ? policy.think_probability(t.problem.bucket)
                                           : 1.0 - policy.think_probability(t.problem.bucket));
    if (t.mode_chosen) expect += std::log(policy.bin_probabilities(t.problem.bucket)[*t.length_bin]);
    CHECK(std::abs(again[0] + (t.mode_chosen ? again[1] : 0.0) - expect) <= 1e-9);
  }
}

TEST_CASE("thinking responses are much longer") {
  const EnvParams env;
  const SurrogatePolicy policy(env.buckets, env.length_bins());
  Rng rng = make_stream(6);
  double think_sum = 0, direct_sum = 0;
  int think_n = 0, direct_n = 0;
  for (int i = 0; i < 10000; ++i) {
    const auto t = rollout(policy, sample_problem(rng, env), env, rng);
    if (t.mode_chosen) {
      think_sum += t.outcome.length;
      ++think_n;
    } else {
      direct_sum += t.outcome.length;
      ++direct_n;
    }
  }
  CHECK(think_sum / think_n >= 2.0 * direct_sum / direct_n);
}

TEST_CASE("rollouts are deterministic") {
  const EnvParams env;
  const SurrogatePolicy policy(env.buckets, env.length_bins());
  Rng a = make_stream(8), b = make_stream(8);
  for (int i = 0; i < 100; ++i) {
    const auto ta = rollout(policy, sample_problem(a, env), env, a);
    const auto tb = rollout(policy, sample_problem(b, env), env, b);
    CHECK(ta.outcome.length == tb.outcome.length);
    CHECK(ta.outcome.correct == tb.outcome.correct);
    CHECK(ta.mode_chosen == tb.mode_chosen);
  }
}

TEST_CASE("policy numerics") {
  SurrogatePolicy p(2, 3);
  p.think_logit(0) = 800.0;
  p.think_logit(1) = -800.0;
  CHECK(p.think_probability(0) == 1.0);
  CHECK(p.think_probability(1) == 0.0);
  CHECK(std::isfinite(p.mode_logprob(1, true)));
  CHECK(p.mode_logprob(1, true) == doctest::Approx(-800.0));
  p.length_logit(0, 2) = 1000.0;
  const auto probs = p.bin_probabilities(0);
  CHECK(probs[2] == doctest::Approx(1.0));
  CHECK(std::isfinite(p.bin_logprob(0, 0)));
  CHECK(p.parameter_count() == 2 + 6);
  CHECK(p.parameter(2 + 2) == 1000.0);
}

TEST_CASE("expected reward gap") {
  EnvParams env;
  const auto naive = GapLaw{};
  CHECK(expected_reward_gap(env, naive, 0.0) == doctest::Approx(-1.0));
  // p_think = 1 and p_nothink = 0
  env.kappa_think = 0.0;
  env.kappa_nothink = 2.0;
  CHECK(expected_reward_gap(env, naive, 0.5) == doctest::Approx(2.0));
  // Equal curves: p - (2p - (1 - p)) = 1 - 2p
  env.kappa_think = 0.5;
  env.kappa_nothink = 0.5 + 1e-12;
  for (double d : {0.1, 0.4, 0.8}) {
    const double p = 1.0 - 0.5 * d;
    CHECK(expected_reward_gap(env, naive, d) == doctest::Approx(1.0 - 2.0 * p).epsilon(1e-9));
  }
  CHECK_THROWS(expected_reward_gap(env, naive, 1.5));
}

TEST_CASE("balanced gap shrinks the no-think advantage when thinking is scarce") {
  const EnvParams env;
  const Stage1Params params{0.5, 2.0};
  const auto balanced = GapLaw::balanced(BatchStats{0.0, 4}, params);
  for (double d : {0.0, 0.2, 0.5, 0.9}) {
    CHECK(expected_reward_gap(env, balanced, d) > expected_reward_gap(env, GapLaw{}, d));
  }
}
