#include "autothink/oracles.h"

#include <algorithm>
#include <cmath>
#include <functional>
#include <stdexcept>

namespace autothink::oracle {

using nlohmann::json;

namespace {

struct RewardRow {
  bool think;
  bool correct;
  double base;
  double anchor;  // where an incorrect sample lands at full penalty
};

constexpr RewardRow kRewardTable[] = {
    {true, true, 1.0, 1.0},
    {true, false, 0.0, -1.0},
    {false, true, 2.0, 2.0},
    {false, false, -1.0, -2.0},
};

const RewardRow& row(bool think, bool correct) {
  for (const auto& r : kRewardTable) {
    if (r.think == think && r.correct == correct) return r;
  }
  throw std::logic_error("reward table incomplete");
}

}  // namespace

double naive_reward(bool think, bool correct) { return row(think, correct).base; }

double stage1_reward(bool think, bool correct, double z, double gamma, double lambda) {
  const double share = think ? z : 1.0 - z;
  double delta = (share - gamma) * lambda;
  if (delta < 0.0) delta = 0.0;
  if (delta > 1.0) delta = 1.0;
  const auto& r = row(think, correct);
  if (correct) return (1.0 - delta) * r.base;
  return (1.0 - delta) * r.base + delta * r.anchor;
}

double stage3_shaping(bool correct, double y, double alpha, double beta) {
  return correct ? std::expm1(-alpha * y) : -std::expm1(-beta * y);
}

std::vector<double> zscore_advantages(const std::vector<double>& rewards) {
  if (rewards.size() < 2) throw std::invalid_argument("degenerate group");
  std::vector<double> out(rewards.size(), 0.0);
  bool constant = true;
  for (double r : rewards) constant = constant && r == rewards.front();
  if (constant) return out;
  long double mean = 0.0L;
  for (double r : rewards) mean += r;
  mean /= static_cast<long double>(rewards.size());
  long double var = 0.0L;
  for (double r : rewards) var += (r - mean) * (r - mean);
  var /= static_cast<long double>(rewards.size());
  const long double sd = std::sqrt(var);
  for (std::size_t i = 0; i < rewards.size(); ++i) {
    out[i] = static_cast<double>((rewards[i] - mean) / (sd + static_cast<long double>(kAdvantageEpsilon)));
  }
  return out;
}

std::vector<double> standardized_lengths(const std::vector<Outcome>& group) {
  std::vector<double> y(group.size(), 0.0);
  for (std::size_t i = 0; i < group.size(); ++i) {
    long double sum = 0.0L, sq = 0.0L;
    std::size_t n = 0;
    for (std::size_t j = 0; j < group.size(); ++j) {
      if (group[j].correct != group[i].correct) continue;
      sum += group[j].length;
      ++n;
    }
    if (n < 2) continue;
    const long double mean = sum / n;
    for (std::size_t j = 0; j < group.size(); ++j) {
      if (group[j].correct == group[i].correct) sq += (group[j].length - mean) * (group[j].length - mean);
    }
    const long double sd = std::sqrt(sq / n);
    if (sd > 0.0L) y[i] = static_cast<double>((group[i].length - mean) / sd);
  }
  return y;
}

std::vector<double> finite_difference_gradient(const std::vector<RolloutGroup>& groups, const SurrogatePolicy& policy,
                                               const std::vector<std::vector<double>>& advantages,
                                               const ClipConfig& clip, double h) {
  std::vector<double> grad(policy.parameter_count());
  SurrogatePolicy probe = policy;
  for (std::size_t j = 0; j < grad.size(); ++j) {
    const double x = policy.parameter(j);
    probe.parameter(j) = x + h;
    const double up = batch_objective(groups, probe, advantages, clip);
    probe.parameter(j) = x - h;
    const double down = batch_objective(groups, probe, advantages, clip);
    probe.parameter(j) = x;
    grad[j] = (up - down) / (2.0 * h);
  }
  return grad;
}

double relative_error(const std::vector<double>& a, const std::vector<double>& b, double floor) {
  if (a.size() != b.size()) throw std::invalid_argument("relative_error: size mismatch");
  double diff = 0.0, scale = floor;
  for (std::size_t i = 0; i < a.size(); ++i) {
    diff = std::max(diff, std::abs(a[i] - b[i]));
    scale = std::max(scale, std::abs(b[i]));
  }
  return diff / scale;
}

GradientInstance random_gradient_instance(Rng& rng, double margin) {
  std::uniform_int_distribution<int> small(1, 3);
  std::uniform_int_distribution<int> bins_dist(2, 4);
  std::uniform_int_distribution<int> group_size(2, 6);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::normal_distribution<double> jitter(0.0, 0.15);
  std::uniform_real_distribution<double> eps_dist(0.1, 0.3);

  EnvParams env;
  env.buckets = static_cast<std::size_t>(small(rng));
  env.length_bin_scales.resize(static_cast<std::size_t>(bins_dist(rng)), 1.0);

  for (;;) {
    GradientInstance inst;
    inst.clip.epsilon = eps_dist(rng);
    inst.policy = SurrogatePolicy(env.buckets, env.length_bins());
    for (std::size_t j = 0; j < inst.policy.parameter_count(); ++j) inst.policy.parameter(j) = normal(rng);
    SurrogatePolicy old = inst.policy;
    for (std::size_t j = 0; j < old.parameter_count(); ++j) old.parameter(j) += jitter(rng);

    const int groups = small(rng);
    for (int g = 0; g < groups; ++g) {
      RolloutGroup group;
      group.query_id = "q" + std::to_string(g);
      const ProblemSpec problem = sample_problem(rng, env);
      const int n = group_size(rng);
      std::vector<double> adv;
      for (int i = 0; i < n; ++i) {
        group.samples.push_back(rollout(old, problem, env, rng));
        group.rewards.push_back(normal(rng));
        adv.push_back(i == 0 ? 0.0 : normal(rng));
      }
      inst.groups.push_back(std::move(group));
      inst.advantages.push_back(std::move(adv));
    }

    bool clear = true;
    for (const auto& g : inst.groups) {
      for (const auto& s : g.samples) {
        const auto now = decision_logprobs(inst.policy, s);
        for (std::size_t t = 0; t < now.size(); ++t) {
          const double r = std::exp(now[t] - s.decision_logprobs[t]);
          if (std::abs(r - (1.0 + inst.clip.epsilon)) < margin || std::abs(r - (1.0 - inst.clip.epsilon)) < margin) {
            clear = false;
          }
        }
      }
    }
    if (clear) return inst;
  }
}

Fault fault_from_string(const std::string& name) {
  if (name == "none") return Fault::None;
  if (name == "advantage") return Fault::AdvantageOffByMean;
  if (name == "reward") return Fault::RewardSign;
  if (name == "gradient") return Fault::GradientScale;
  throw std::invalid_argument("unknown fault '" + name + "' (expected advantage, reward or gradient)");
}

namespace {

double max_abs_diff(const std::vector<double>& a, const std::vector<double>& b) {
  double d = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) d = std::max(d, std::abs(a[i] - b[i]));
  return d;
}

void record(CheckResult& res, double err, const std::function<json()>& describe) {
  ++res.instances;
  res.worst_error = std::max(res.worst_error, err);
  if (!(err <= res.tolerance) && !res.failing_instance) res.failing_instance = describe();
}

json instance_json(const GradientInstance& inst) {
  json groups = json::array();
  for (const auto& g : inst.groups) {
    json samples = json::array();
    for (const auto& s : g.samples) {
      json j = {{"bucket", s.problem.bucket},
                {"difficulty", s.problem.difficulty},
                {"think", s.mode_chosen},
                {"old_logprobs", s.decision_logprobs}};
      if (s.length_bin) j["length_bin"] = *s.length_bin;
      samples.push_back(j);
    }
    groups.push_back({{"query_id", g.query_id}, {"samples", samples}});
  }
  std::vector<double> params;
  for (std::size_t j = 0; j < inst.policy.parameter_count(); ++j) params.push_back(inst.policy.parameter(j));
  return {{"buckets", inst.policy.buckets()},
          {"bins", inst.policy.bins()},
          {"parameters", params},
          {"clip_epsilon", inst.clip.epsilon},
          {"advantages", inst.advantages},
          {"groups", groups}};
}

}  // namespace

std::vector<CheckResult> run_all(std::size_t count, std::uint64_t seed, Fault fault) {
  if (count == 0) throw std::invalid_argument("oracle check: count must be >= 1");
  std::vector<CheckResult> out;

  {
    CheckResult res{"naive_reward", 0, 0.0, 0.0, std::nullopt};
    for (bool think : {true, false}) {
      for (bool correct : {true, false}) {
        double got = autothink::naive_reward(think, correct);
        if (fault == Fault::RewardSign) got = -got;
        const double want = naive_reward(think, correct);
        record(res, std::abs(got - want), [&] {
          return json{{"think", think}, {"correct", correct}, {"expected", want}, {"actual", got}};
        });
      }
    }
    out.push_back(res);
  }

  {
    CheckResult res{"stage1_reward", 0, 0.0, 1e-12, std::nullopt};
    Rng rng = make_stream(seed, 1);
    std::uniform_int_distribution<std::size_t> size_dist(1, 1024);
    std::uniform_real_distribution<double> gamma_dist(0.01, 0.99), lambda_dist(0.0, 10.0);
    std::bernoulli_distribution coin(0.5);
    for (std::size_t k = 0; k < count; ++k) {
      const std::size_t n = size_dist(rng);
      const std::size_t thinking = std::uniform_int_distribution<std::size_t>(0, n)(rng);
      const Stage1Params params{gamma_dist(rng), lambda_dist(rng)};
      const bool think = coin(rng), correct = coin(rng);
      const auto stats = BatchStats::from_counts(thinking, n);
      double got = autothink::stage1_reward(Outcome{think, correct, 0, {}, 0}, stats, params);
      if (fault == Fault::RewardSign) got = -got;
      const double want = stage1_reward(think, correct, stats.z, params.gamma, params.lambda);
      record(res, std::abs(got - want), [&] {
        return json{{"z", stats.z},         {"batch_size", n},   {"gamma", params.gamma}, {"lambda", params.lambda},
                    {"think", think},       {"correct", correct}, {"expected", want},      {"actual", got}};
      });
    }
    out.push_back(res);
  }

  {
    CheckResult res{"stage3_reward", 0, 0.0, 1e-12, std::nullopt};
    Rng rng = make_stream(seed, 2);
    std::uniform_int_distribution<int> size_dist(1, 16);
    std::uniform_int_distribution<std::int64_t> len_dist(1, 20000);
    std::uniform_real_distribution<double> rate_dist(0.0, 0.5);
    std::bernoulli_distribution coin(0.5);
    for (std::size_t k = 0; k < count; ++k) {
      std::vector<Outcome> group;
      const int n = size_dist(rng);
      for (int i = 0; i < n; ++i) {
        // Repeated lengths exercise the zero-variance rule.
        const std::int64_t len = coin(rng) ? len_dist(rng) : 1000;
        group.push_back(Outcome{coin(rng), coin(rng), len, "g", static_cast<std::size_t>(i)});
      }
      const Stage3Params params{rate_dist(rng), rate_dist(rng)};
      const auto y = autothink::standardize_lengths(group);
      const auto y_ref = standardized_lengths(group);
      std::vector<double> got, want;
      for (std::size_t i = 0; i < group.size(); ++i) {
        got.push_back(autothink::stage3_reward(group[i], y[i], params));
        want.push_back(naive_reward(group[i].think, group[i].correct) +
                       stage3_shaping(group[i].correct, y_ref[i], params.alpha, params.beta));
      }
      if (fault == Fault::RewardSign) {
        for (double& g : got) g = -g;
      }
      record(res, std::max(max_abs_diff(got, want), max_abs_diff(y, y_ref)), [&] {
        json lens = json::array();
        for (const auto& o : group) lens.push_back({{"think", o.think}, {"correct", o.correct}, {"length", o.length}});
        return json{{"outcomes", lens}, {"alpha", params.alpha}, {"beta", params.beta}, {"expected", want},
                    {"actual", got}};
      });
    }
    out.push_back(res);
  }

  {
    CheckResult res{"group_advantage", 0, 0.0, 1e-12, std::nullopt};
    Rng rng = make_stream(seed, 3);
    std::uniform_int_distribution<int> size_dist(2, 16);
    std::uniform_int_distribution<int> level(-2, 2);
    std::uniform_real_distribution<double> value(-3.0, 3.0);
    std::bernoulli_distribution coin(0.5);
    for (std::size_t k = 0; k < count; ++k) {
      const int n = size_dist(rng);
      const bool discrete = coin(rng);
      std::vector<double> rewards;
      for (int i = 0; i < n; ++i) rewards.push_back(discrete ? level(rng) : value(rng));
      auto got = group_advantage(rewards);
      if (fault == Fault::AdvantageOffByMean) {
        double mean = 0.0;
        for (double r : rewards) mean += r;
        mean /= n;
        for (double& a : got) a += mean;
      }
      const auto want = zscore_advantages(rewards);
      record(res, max_abs_diff(got, want), [&] {
        return json{{"rewards", rewards}, {"expected", want}, {"actual", got}};
      });
    }
    out.push_back(res);
  }

  {
    CheckResult res{"policy_gradient", 0, 0.0, 1e-5, std::nullopt};
    Rng rng = make_stream(seed, 4);
    for (std::size_t k = 0; k < count; ++k) {
      const auto inst = random_gradient_instance(rng);
      auto got = policy_gradient(inst.groups, inst.policy, inst.advantages, inst.clip);
      if (fault == Fault::GradientScale) {
        for (double& g : got) g *= 1.01;
      }
      const auto want = finite_difference_gradient(inst.groups, inst.policy, inst.advantages, inst.clip);
      record(res, relative_error(got, want), [&] {
        json j = instance_json(inst);
        j["expected"] = want;
        j["actual"] = got;
        return j;
      });
    }
    out.push_back(res);
  }
  return out;
}

}  // namespace autothink::oracle
