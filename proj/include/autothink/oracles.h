#pragma once

// Reference implementations used to cross-check the production code. They
// are deliberately written differently: table lookups instead of formulas,
// long double accumulation, finite differences instead of analytic gradients.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "autothink/grpo.h"
#include "autothink/reward.h"
#include "autothink/surrogate.h"

namespace autothink::oracle {

double naive_reward(bool think, bool correct);
double stage1_reward(bool think, bool correct, double z, double gamma, double lambda);
double stage3_shaping(bool correct, double y, double alpha, double beta);

std::vector<double> zscore_advantages(const std::vector<double>& rewards);
/// y per outcome, cohorts found by brute-force pairwise comparison.
std::vector<double> standardized_lengths(const std::vector<Outcome>& group);

/// Central differences of batch_objective over every policy parameter.
std::vector<double> finite_difference_gradient(const std::vector<RolloutGroup>& groups, const SurrogatePolicy& policy,
                                               const std::vector<std::vector<double>>& advantages,
                                               const ClipConfig& clip, double h = 1e-6);

/// max |a - b| / max(max |b|, floor).
double relative_error(const std::vector<double>& a, const std::vector<double>& b, double floor = 1e-12);

/// Random instance for gradient checks: old log-probs come from a perturbed
/// policy, and no ratio sits within `margin` of a clip edge.
struct GradientInstance {
  SurrogatePolicy policy;
  std::vector<RolloutGroup> groups;
  std::vector<std::vector<double>> advantages;
  ClipConfig clip;
};

GradientInstance random_gradient_instance(Rng& rng, double margin = 1e-3);

enum class Fault { None, AdvantageOffByMean, RewardSign, GradientScale };

Fault fault_from_string(const std::string& name);

struct CheckResult {
  std::string name;
  std::size_t instances = 0;
  double worst_error = 0.0;
  double tolerance = 0.0;
  std::optional<nlohmann::json> failing_instance;  // first failure, for replay

  bool passed() const { return !failing_instance; }
};

/// Runs every oracle on `count` random instances each. `fault` corrupts the
/// implementation side so the harness can be shown to catch it.
std::vector<CheckResult> run_all(std::size_t count, std::uint64_t seed, Fault fault = Fault::None);

}  // namespace autothink::oracle
