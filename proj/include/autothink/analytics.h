#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace autothink {

enum class PromptVariant { Standard, Ellipsis, NoThinking, ForcedNoThink, TBD };

std::string to_string(PromptVariant kind);
PromptVariant prompt_variant_from_string(const std::string& name);

inline constexpr std::string_view kBaseInstruction =
    "Let's think step by step and output the final answer within \\boxed{}.";
inline constexpr std::string_view kTbdClause =
    "Please decide whether to continue thinking based on the difficulty of the question.";

/// Text placed after the question. Only TBD carries an instruction; the
/// others are bare think-tag suffixes.
std::string build_prompt(PromptVariant kind);

inline constexpr std::string_view kThinkOpen = "<think>";
inline constexpr std::string_view kThinkClose = "</think>";

/// Response split at the think tags. The opening tag is optional because
/// most prompts already end with it.
struct ParsedResponse {
  std::string prefix;  // before the opening tag
  std::string think_span;
  std::string answer_span;
  bool has_open_tag = false;
  bool malformed = false;  // no closing tag

  std::string reconstruct() const;
};

ParsedResponse parse_response(std::string_view text);

struct Transcript {
  std::string id;
  std::string problem_id;
  std::string dataset;
  std::optional<PromptVariant> prompt_kind;
  std::string response_text;
  std::optional<std::int64_t> token_count;
  std::optional<bool> correct;
  std::optional<double> difficulty;
};

enum class Mode { Think, NoThink, Malformed };

std::string to_string(Mode mode);

/// Whitespace tokens of the think span that survive stripping '.' and '…'.
std::size_t substantive_tokens(std::string_view think_span);

Mode classify_mode(std::string_view response_text, int tau = 0);
Mode classify_mode(const Transcript& t, int tau = 0);

/// Whitespace-delimited word count.
std::size_t word_count(std::string_view text);

/// Efficiency-F1 in percent. Throws if the baselines are not ordered.
double efficiency_f1(double acc, double len, double acc_std, double len_std, double acc_no, double len_no);

struct EfficiencyInputs {
  double acc = 0.0, len = 0.0;
  double acc_std = 0.0, len_std = 0.0;
  double acc_no = 0.0, len_no = 0.0;
};

/// E-F1 of the averaged accuracy/length inputs.
double efficiency_f1_of_averages(std::span<const EfficiencyInputs> rows);
/// Mean of the per-row E-F1 values.
double efficiency_f1_mean_of_rows(std::span<const EfficiencyInputs> rows);

enum class Binning { EqualWidth, Quantile };

/// Level per problem, 0 easiest. Higher pass rate never gets a higher level.
std::vector<int> difficulty_buckets(std::span<const double> pass_rates, int levels,
                                    Binning binning = Binning::EqualWidth);

/// Fraction of NoThink among non-malformed transcripts per level; nullopt
/// for levels with nothing to count.
std::vector<std::optional<double>> no_thinking_rate_by_level(std::span<const int> levels,
                                                             std::span<const Mode> modes, int level_count);

/// Category name -> entries. An entry with spaces is a phrase.
using Lexicon = std::vector<std::pair<std::string, std::vector<std::string>>>;

Lexicon default_lexicon();
Lexicon lexicon_from_json(const std::string& json_text);

/// Matches per 1000 whitespace tokens, per category, in lexicon order.
std::vector<std::pair<std::string, double>> keyword_profile(std::string_view text, const Lexicon& lexicon);

struct BenchmarkSummary {
  double accuracy = 0.0;  // percent
  double mean_tokens = 0.0;
  std::size_t problems = 0;
  std::size_t rollouts = 0;
  bool approximate_tokens = false;  // some counts fell back to word_count
};

/// pass@1 over problems (grouped by problem_id, or id when empty).
BenchmarkSummary summarize_benchmark(std::span<const Transcript> transcripts);

}  // namespace autothink
