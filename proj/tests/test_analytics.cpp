#include <doctest.h>

#include <random>
#include <string>

#include "autothink/analytics.h"

using namespace autothink;

TEST_CASE("prompt suffixes") {
  CHECK(build_prompt(PromptVariant::Standard) == "<think>\n");
  CHECK(build_prompt(PromptVariant::Ellipsis) == "<think>\n...\n");
  CHECK(build_prompt(PromptVariant::NoThinking) == "<think>\n</think>\n\n");
  CHECK(build_prompt(PromptVariant::ForcedNoThink) == "<think>\n...\n</think>\n\n");
  CHECK(build_prompt(PromptVariant::TBD) ==
        "Let's think step by step and output the final answer within \\boxed{}. Please decide whether to continue "
        "thinking based on the difficulty of the question.\n<think>\n...\n");
  for (auto k : {PromptVariant::Standard, PromptVariant::Ellipsis, PromptVariant::NoThinking,
                 PromptVariant::ForcedNoThink, PromptVariant::TBD}) {
    CHECK(prompt_variant_from_string(to_string(k)) == k);
  }
  CHECK_THROWS(prompt_variant_from_string("verbose"));
}

TEST_CASE("mode classification") {
  CHECK(classify_mode("...\n</think>\n\nThe answer is 4.") == Mode::NoThink);
  CHECK(classify_mode("First, compute 2+2. ...</think>4") == Mode::Think);
  CHECK(classify_mode("<think>\nstill going") == Mode::Malformed);
  CHECK(classify_mode("<think>\n…  . ..\n</think>x") == Mode::NoThink);
  CHECK(classify_mode("<think>ok fine</think>x", 2) == Mode::NoThink);
  CHECK(classify_mode("<think>ok fine</think>x", 1) == Mode::Think);
  CHECK_THROWS(classify_mode("x</think>", -1));

  // A forced no-think completion with nothing added inside the span.
  const std::string forced = build_prompt(PromptVariant::ForcedNoThink) + "The answer is 3.";
  CHECK(classify_mode(forced) == Mode::NoThink);

  Transcript t;
  t.response_text = "</think>direct";
  CHECK(classify_mode(t) == Mode::NoThink);
  CHECK(to_string(Mode::Malformed) == "malformed");
}

TEST_CASE("parsing") {
  const auto p = parse_response("pre<think>abc</think>answer</think>");
  CHECK(p.prefix == "pre");
  CHECK(p.has_open_tag);
  CHECK(p.think_span == "abc");
  CHECK(p.answer_span == "answer</think>");
  CHECK_FALSE(p.malformed);

  const auto m = parse_response("<think>never closed");
  CHECK(m.malformed);
  CHECK(m.answer_span.empty());
  CHECK(m.think_span == "never closed");

  std::mt19937_64 rng(17);
  const std::vector<std::string> atoms{"<think>", "</think>", "a", " ", "\n", "...", "wait", "<", ">", "x y"};
  for (int i = 0; i < 2000; ++i) {
    std::string s;
    const int n = static_cast<int>(rng() % 12);
    for (int k = 0; k < n; ++k) s += atoms[rng() % atoms.size()];
    const auto r = parse_response(s);
    if (!r.malformed) CHECK(r.reconstruct() == s);
  }
}

TEST_CASE("efficiency f1") {
  CHECK(efficiency_f1(51.7, 5108, 48.6, 10633, 37.5, 2528) == doctest::Approx(39.6).epsilon(0.1 / 39.6));
  const double prune = efficiency_f1(49.8, 4943, 48.6, 10633, 37.5, 2528);
  CHECK(prune >= 18.6);
  CHECK(prune <= 18.8);
  CHECK(efficiency_f1(51.4, 7295, 48.6, 10633, 37.5, 2528) == doctest::Approx(31.3).epsilon(0.1 / 31.3));
  CHECK(efficiency_f1(48.6, 5108, 48.6, 10633, 37.5, 2528) == 0.0);
  CHECK(efficiency_f1(51.7, 10633, 48.6, 10633, 37.5, 2528) == 0.0);
  CHECK(efficiency_f1(40.0, 12000, 48.6, 10633, 37.5, 2528) == 0.0);
  CHECK_THROWS(efficiency_f1(50, 5000, 37.5, 10633, 37.5, 2528));
  CHECK_THROWS(efficiency_f1(50, 5000, 48.6, 2528, 37.5, 2528));

  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> acc(48.7, 70.0), len(100.0, 10600.0);
  for (int i = 0; i < 1000; ++i) {
    const double a = acc(rng), l = len(rng);
    const double base = efficiency_f1(a, l, 48.6, 10633, 37.5, 2528);
    CHECK(base > 0.0);
    CHECK(efficiency_f1(a + 0.01, l, 48.6, 10633, 37.5, 2528) > base);
    CHECK(efficiency_f1(a, l + 1.0, 48.6, 10633, 37.5, 2528) < base);
  }

  const std::vector<EfficiencyInputs> rows{{51.7, 5108, 48.6, 10633, 37.5, 2528}, {60.0, 3000, 55.0, 9000, 40.0, 2000}};
  const double avg = efficiency_f1_of_averages(rows);
  const double mean = efficiency_f1_mean_of_rows(rows);
  CHECK(avg > 0.0);
  CHECK(mean == doctest::Approx((efficiency_f1(51.7, 5108, 48.6, 10633, 37.5, 2528) +
                                 efficiency_f1(60.0, 3000, 55.0, 9000, 40.0, 2000)) /
                                2.0));
}

TEST_CASE("difficulty buckets") {
  const std::vector<double> p{1.0, 0.0, 0.49, 0.875, 0.124};
  const auto lv = difficulty_buckets(p, 8);
  CHECK(lv == std::vector<int>{0, 7, 4, 0, 7});
  CHECK_THROWS(difficulty_buckets(std::vector<double>{1.2}, 8));
  CHECK_THROWS(difficulty_buckets(std::vector<double>{0.5}, 1));

  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<double> rates(500);
  for (auto& r : rates) r = (rng() % 4 == 0) ? static_cast<double>(rng() % 17) / 16.0 : u(rng);
  for (auto binning : {Binning::EqualWidth, Binning::Quantile}) {
    const auto levels = difficulty_buckets(rates, 8, binning);
    for (std::size_t i = 0; i < rates.size(); ++i) {
      REQUIRE(levels[i] >= 0);
      REQUIRE(levels[i] < 8);
      for (std::size_t j = 0; j < rates.size(); ++j) {
        if (rates[i] > rates[j]) REQUIRE(levels[i] <= levels[j]);
      }
    }
  }
}

TEST_CASE("no-thinking rate by level") {
  const std::vector<int> levels{0, 0, 0, 0, 1, 1, 3};
  const std::vector<Mode> modes{Mode::Think, Mode::Think, Mode::Think, Mode::NoThink,
                                Mode::NoThink, Mode::Malformed, Mode::Malformed};
  const auto r = no_thinking_rate_by_level(levels, modes, 4);
  REQUIRE(r.size() == 4);
  CHECK(*r[0] == 0.25);
  CHECK(*r[1] == 1.0);
  CHECK_FALSE(r[2].has_value());
  CHECK_FALSE(r[3].has_value());
}

TEST_CASE("keyword profile") {
  const auto lex = default_lexicon();
  REQUIRE(lex.size() == 3);
  CHECK(lex[0].first == "Soliloquize & Thinking");

  std::string text;
  for (int i = 0; i < 1000; ++i) text += (i % 100 == 0 && i < 700) ? "Wait, " : "blah ";
  const auto prof = keyword_profile(text, lex);
  CHECK(prof[0].second == doctest::Approx(7.0));
  CHECK(prof[1].second == 0.0);

  for (const auto& [name, rate] : keyword_profile("", lex)) CHECK(rate == 0.0);
  CHECK(keyword_profile("Awaits the checker", lex)[0].second == 0.0);
  CHECK(keyword_profile("Awaits the checker", lex)[1].second == 0.0);
  // phrase spans two tokens
  CHECK(keyword_profile("let me think now", lex)[0].second == doctest::Approx(250.0));
  CHECK(keyword_profile("Double-check it", lex)[1].second == doctest::Approx(500.0));

  const std::string sample = "Hmm wait. Let me check: therefore the total is 5. Alternatively verify it, so done";
  const auto once = keyword_profile(sample, lex), twice = keyword_profile(sample + " " + sample, lex);
  for (std::size_t c = 0; c < once.size(); ++c) CHECK(std::abs(once[c].second - twice[c].second) <= 1e-9);

  CHECK_THROWS(keyword_profile("x", Lexicon{}));
  const auto custom = lexicon_from_json(R"({"categories": [{"name": "A", "words": ["foo bar", "baz"]}]})");
  REQUIRE(custom.size() == 1);
  CHECK(keyword_profile("foo bar baz qux", custom)[0].second == doctest::Approx(500.0));
  CHECK_THROWS(lexicon_from_json("{}"));
}

TEST_CASE("benchmark summary") {
  std::vector<Transcript> ts;
  auto add = [&](std::string pid, bool c, std::int64_t tokens) {
    Transcript t;
    t.id = pid + "-" + std::to_string(ts.size());
    t.problem_id = pid;
    t.correct = c;
    t.token_count = tokens;
    ts.push_back(t);
  };
  add("a", true, 1000);
  add("a", true, 1000);
  add("b", true, 1000);
  add("b", false, 1000);
  const auto s = summarize_benchmark(ts);
  CHECK(s.accuracy == 75.0);
  CHECK(s.mean_tokens == 1000.0);
  CHECK(s.problems == 2);
  CHECK(s.rollouts == 4);
  CHECK_FALSE(s.approximate_tokens);

  ts[1].token_count.reset();
  ts[1].response_text = "one two three";
  const auto approx = summarize_benchmark(ts);
  CHECK(approx.approximate_tokens);
  CHECK(approx.mean_tokens == doctest::Approx((3000.0 + 3.0) / 4.0));

  ts[2].correct.reset();
  ts[3].correct.reset();
  try {
    (void)summarize_benchmark(ts);
    FAIL("expected an error");
  } catch (const std::exception& e) {
    const std::string msg = e.what();
    CHECK(msg.find(ts[2].id) != std::string::npos);
    CHECK(msg.find(ts[3].id) != std::string::npos);
  }
  CHECK_THROWS(summarize_benchmark(std::vector<Transcript>{}));
}
