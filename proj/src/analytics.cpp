#include "autothink/analytics.h"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include <json.hpp>

namespace autothink {

std::string to_string(PromptVariant kind) {
  switch (kind) {
    case PromptVariant::Standard: return "standard";
    case PromptVariant::Ellipsis: return "ellipsis";
    case PromptVariant::NoThinking: return "no_thinking";
    case PromptVariant::ForcedNoThink: return "forced_no_think";
    case PromptVariant::TBD: return "tbd";
  }
  return "standard";
}

PromptVariant prompt_variant_from_string(const std::string& name) {
  if (name == "standard") return PromptVariant::Standard;
  if (name == "ellipsis") return PromptVariant::Ellipsis;
  if (name == "no_thinking") return PromptVariant::NoThinking;
  if (name == "forced_no_think") return PromptVariant::ForcedNoThink;
  if (name == "tbd") return PromptVariant::TBD;
  throw std::invalid_argument("unknown prompt kind '" + name + "'");
}

std::string build_prompt(PromptVariant kind) {
  switch (kind) {
    case PromptVariant::Standard: return "<think>\n";
    case PromptVariant::Ellipsis: return "<think>\n...\n";
    case PromptVariant::NoThinking: return "<think>\n</think>\n\n";
    case PromptVariant::ForcedNoThink: return "<think>\n...\n</think>\n\n";
    case PromptVariant::TBD:
      return std::string(kBaseInstruction) + " " + std::string(kTbdClause) + "\n" +
             build_prompt(PromptVariant::Ellipsis);
  }
  return "";
}

std::string ParsedResponse::reconstruct() const {
  std::string out = prefix;
  if (has_open_tag) out += kThinkOpen;
  out += think_span;
  if (!malformed) {
    out += kThinkClose;
    out += answer_span;
  }
  return out;
}

ParsedResponse parse_response(std::string_view text) {
  ParsedResponse r;
  std::size_t body = 0;
  const auto open = text.find(kThinkOpen);
  const auto first_close = text.find(kThinkClose);
  // An opening tag after the first close belongs to the answer.
  if (open != std::string_view::npos && (first_close == std::string_view::npos || open < first_close)) {
    r.has_open_tag = true;
    r.prefix = std::string(text.substr(0, open));
    body = open + kThinkOpen.size();
  }
  const auto close = text.find(kThinkClose, body);
  if (close == std::string_view::npos) {
    r.malformed = true;
    r.think_span = std::string(text.substr(body));
    return r;
  }
  r.think_span = std::string(text.substr(body, close - body));
  r.answer_span = std::string(text.substr(close + kThinkClose.size()));
  return r;
}

std::string to_string(Mode mode) {
  switch (mode) {
    case Mode::Think: return "think";
    case Mode::NoThink: return "no_think";
    case Mode::Malformed: return "malformed";
  }
  return "malformed";
}

namespace {

bool is_space(char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; }

template <typename F>
void for_each_word(std::string_view text, F&& fn) {
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && is_space(text[i])) ++i;
    const std::size_t start = i;
    while (i < text.size() && !is_space(text[i])) ++i;
    if (i > start) fn(text.substr(start, i - start));
  }
}

constexpr std::string_view kEllipsisChar = "\xE2\x80\xA6";

bool only_dots(std::string_view word) {
  std::size_t i = 0;
  while (i < word.size()) {
    if (word[i] == '.') {
      ++i;
    } else if (word.substr(i, kEllipsisChar.size()) == kEllipsisChar) {
      i += kEllipsisChar.size();
    } else {
      return false;
    }
  }
  return true;
}

std::string normalize_word(std::string_view word) {
  std::size_t b = 0, e = word.size();
  auto punct = [](char c) { return std::ispunct(static_cast<unsigned char>(c)) != 0; };
  while (b < e && punct(word[b])) ++b;
  while (e > b && punct(word[e - 1])) --e;
  std::string out(word.substr(b, e - b));
  for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

}  // namespace

std::size_t substantive_tokens(std::string_view think_span) {
  std::size_t n = 0;
  for_each_word(think_span, [&](std::string_view w) { n += !only_dots(w); });
  return n;
}

Mode classify_mode(std::string_view response_text, int tau) {
  if (tau < 0) throw std::invalid_argument("classify_mode: tau must be >= 0");
  const auto parsed = parse_response(response_text);
  if (parsed.malformed) return Mode::Malformed;
  return substantive_tokens(parsed.think_span) <= static_cast<std::size_t>(tau) ? Mode::NoThink : Mode::Think;
}

Mode classify_mode(const Transcript& t, int tau) { return classify_mode(t.response_text, tau); }

std::size_t word_count(std::string_view text) {
  std::size_t n = 0;
  for_each_word(text, [&](std::string_view) { ++n; });
  return n;
}

double efficiency_f1(double acc, double len, double acc_std, double len_std, double acc_no, double len_no) {
  if (!(acc_std > acc_no)) throw std::invalid_argument("efficiency_f1: standard accuracy must exceed no-thinking");
  if (!(len_std > len_no)) throw std::invalid_argument("efficiency_f1: standard length must exceed no-thinking");
  if (!(acc > acc_std && len < len_std)) return 0.0;
  const double d_acc = (acc - acc_std) / (acc_std - acc_no);
  const double d_len = (len_std - len) / (len_std - len_no);
  return 100.0 * 2.0 * d_acc * d_len / (d_acc + d_len);
}

double efficiency_f1_of_averages(std::span<const EfficiencyInputs> rows) {
  if (rows.empty()) throw std::invalid_argument("efficiency_f1: no rows");
  EfficiencyInputs m;
  for (const auto& r : rows) {
    m.acc += r.acc;
    m.len += r.len;
    m.acc_std += r.acc_std;
    m.len_std += r.len_std;
    m.acc_no += r.acc_no;
    m.len_no += r.len_no;
  }
  const double n = static_cast<double>(rows.size());
  return efficiency_f1(m.acc / n, m.len / n, m.acc_std / n, m.len_std / n, m.acc_no / n, m.len_no / n);
}

double efficiency_f1_mean_of_rows(std::span<const EfficiencyInputs> rows) {
  if (rows.empty()) throw std::invalid_argument("efficiency_f1: no rows");
  double sum = 0.0;
  for (const auto& r : rows) sum += efficiency_f1(r.acc, r.len, r.acc_std, r.len_std, r.acc_no, r.len_no);
  return sum / static_cast<double>(rows.size());
}

std::vector<int> difficulty_buckets(std::span<const double> pass_rates, int levels, Binning binning) {
  if (levels < 2) throw std::invalid_argument("difficulty_buckets: levels must be >= 2");
  for (double p : pass_rates) {
    if (!(p >= 0.0 && p <= 1.0)) throw std::invalid_argument("difficulty_buckets: pass rate outside [0, 1]");
  }
  std::vector<int> out(pass_rates.size());
  if (binning == Binning::EqualWidth) {
    for (std::size_t i = 0; i < pass_rates.size(); ++i) {
      const int bin = static_cast<int>(std::floor(pass_rates[i] * levels));
      out[i] = levels - 1 - std::min(bin, levels - 1);
    }
    return out;
  }

  // Quantile: rank from easiest; ties share the rank of their first member.
  std::vector<std::size_t> order(pass_rates.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return pass_rates[a] > pass_rates[b]; });
  const double n = static_cast<double>(pass_rates.size());
  std::size_t rank = 0;
  for (std::size_t k = 0; k < order.size(); ++k) {
    if (k == 0 || pass_rates[order[k]] != pass_rates[order[k - 1]]) rank = k;
    out[order[k]] = std::min(levels - 1, static_cast<int>(std::floor(static_cast<double>(rank) * levels / n)));
  }
  return out;
}

std::vector<std::optional<double>> no_thinking_rate_by_level(std::span<const int> levels,
                                                             std::span<const Mode> modes, int level_count) {
  if (levels.size() != modes.size()) throw std::invalid_argument("no_thinking_rate_by_level: size mismatch");
  if (level_count < 1) throw std::invalid_argument("no_thinking_rate_by_level: level_count must be positive");
  std::vector<std::size_t> counted(level_count, 0), skipped(level_count, 0);
  for (std::size_t i = 0; i < levels.size(); ++i) {
    if (levels[i] < 0 || levels[i] >= level_count) {
      throw std::invalid_argument("no_thinking_rate_by_level: level out of range");
    }
    if (modes[i] == Mode::Malformed) continue;
    ++counted[levels[i]];
    skipped[levels[i]] += modes[i] == Mode::NoThink;
  }
  std::vector<std::optional<double>> out(level_count);
  for (int l = 0; l < level_count; ++l) {
    if (counted[l] > 0) out[l] = static_cast<double>(skipped[l]) / static_cast<double>(counted[l]);
  }
  return out;
}

Lexicon default_lexicon() {
  return {
      {"Soliloquize & Thinking", {"wait", "hmm", "alternatively", "maybe", "perhaps", "actually", "let me think"}},
      {"Check & Confirm", {"check", "verify", "confirm", "double-check", "make sure"}},
      {"Summary & Calculation", {"therefore", "thus", "so", "compute", "calculate", "total", "final answer"}},
  };
}

Lexicon lexicon_from_json(const std::string& json_text) {
  const auto doc = nlohmann::json::parse(json_text);
  if (!doc.is_object() || !doc.contains("categories") || !doc["categories"].is_array()) {
    throw std::invalid_argument("lexicon: expected an object with a 'categories' array");
  }
  Lexicon lex;
  for (const auto& c : doc["categories"]) {
    lex.emplace_back(c.at("name").get<std::string>(), c.at("words").get<std::vector<std::string>>());
  }
  if (lex.empty()) throw std::invalid_argument("lexicon: no categories");
  return lex;
}

std::vector<std::pair<std::string, double>> keyword_profile(std::string_view text, const Lexicon& lexicon) {
  if (lexicon.empty()) throw std::invalid_argument("keyword_profile: empty lexicon");
  std::vector<std::string> tokens;
  for_each_word(text, [&](std::string_view w) { tokens.push_back(normalize_word(w)); });

  std::vector<std::pair<std::string, double>> out;
  for (const auto& [category, entries] : lexicon) {
    std::size_t matches = 0;
    for (const auto& entry : entries) {
      std::vector<std::string> phrase;
      for_each_word(entry, [&](std::string_view w) { phrase.push_back(normalize_word(w)); });
      if (phrase.empty() || phrase.size() > tokens.size()) continue;
      for (std::size_t i = 0; i + phrase.size() <= tokens.size(); ++i) {
        matches += std::equal(phrase.begin(), phrase.end(), tokens.begin() + static_cast<std::ptrdiff_t>(i));
      }
    }
    const double rate = tokens.empty() ? 0.0 : 1000.0 * static_cast<double>(matches) / tokens.size();
    out.emplace_back(category, rate);
  }
  return out;
}

BenchmarkSummary summarize_benchmark(std::span<const Transcript> transcripts) {
  std::vector<std::string> missing;
  for (const auto& t : transcripts) {
    if (!t.correct) missing.push_back(t.id);
  }
  if (!missing.empty()) {
    std::string ids;
    for (const auto& id : missing) ids += (ids.empty() ? "" : ", ") + id;
    throw std::invalid_argument("summarize_benchmark: missing correct flag for " + ids);
  }
  if (transcripts.empty()) throw std::invalid_argument("summarize_benchmark: no transcripts");

  std::map<std::string, std::pair<std::size_t, std::size_t>> per_problem;  // correct, total
  BenchmarkSummary s;
  double tokens = 0.0;
  for (const auto& t : transcripts) {
    auto& [c, n] = per_problem[t.problem_id.empty() ? t.id : t.problem_id];
    c += *t.correct;
    ++n;
    if (t.token_count) {
      tokens += static_cast<double>(*t.token_count);
    } else {
      tokens += static_cast<double>(word_count(t.response_text));
      s.approximate_tokens = true;
    }
  }
  double acc = 0.0;
  for (const auto& [id, cn] : per_problem) acc += static_cast<double>(cn.first) / static_cast<double>(cn.second);
  s.problems = per_problem.size();
  s.rollouts = transcripts.size();
  s.accuracy = 100.0 * acc / static_cast<double>(s.problems);
  s.mean_tokens = tokens / static_cast<double>(s.rollouts);
  return s;
}

}  // namespace autothink
