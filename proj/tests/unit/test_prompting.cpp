#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

#include "oasfim/error.hpp"
#include "oasfim/prompting.hpp"
#include "test_support.hpp"

namespace oasfim {
namespace {

constexpr TokenId PRE = 256, SUF = 257, MID = 258;

PromptConfig config(FimFormat f, std::size_t c = 4096, double r = 0.5) {
  PromptConfig cfg;
  cfg.format = f;
  cfg.context_size = c;
  cfg.prefix_ratio = r;
  return cfg;
}

TEST(BuildPrompt, PsmLayout) {
  ByteTokenizer tok;
  auto p = build_prompt("a", "b", config(FimFormat::psm), tok);
  EXPECT_EQ(p.tokens, (std::vector<TokenId>{PRE, 'a', SUF, 'b', MID}));
  EXPECT_EQ(render_prompt_text(p, tok), "<PRE>a<SUF>b<MID>");
}

TEST(BuildPrompt, SpmLayout) {
  ByteTokenizer tok;
  auto p = build_prompt("a", "b", config(FimFormat::spm), tok);
  EXPECT_EQ(p.tokens, (std::vector<TokenId>{PRE, SUF, 'b', MID, 'a'}));
  EXPECT_EQ(render_prompt_text(p, tok), "<PRE><SUF>b<MID>a");
}

TEST(BuildPrompt, EmptySuffix) {
  ByteTokenizer tok;
  auto p = build_prompt("a", "", config(FimFormat::psm), tok);
  EXPECT_EQ(p.tokens, (std::vector<TokenId>{PRE, 'a', SUF, MID}));
}

TEST(BuildPrompt, TooSmallContext) {
  ByteTokenizer tok;
  auto cfg = config(FimFormat::psm, 4);
  EXPECT_THROW(build_prompt("a", "b", cfg, tok), BudgetTooSmall);
  cfg.context_size = 15;
  EXPECT_THROW(build_prompt("a", "b", cfg, tok), std::invalid_argument);
  EXPECT_THROW(build_prompt("a", "b", config(FimFormat::psm, 64, 1.0), tok), std::invalid_argument);
}

TEST(BuildPrompt, ComponentsArePrependedToPrefix) {
  ByteTokenizer tok;
  auto doc = parse_definition("openapi: 3.0.0\ncomponents:\n  schemas:\n    Pet: {}\n    Error: {}\n");
  TestCase tc;
  tc.prefix = "openapi: 3.0.0\n";
  tc.suffix = "tail\n";
  auto cfg = config(FimFormat::psm);
  cfg.include_components = true;
  auto parts = decode_prompt(build_prompt(tc, doc, cfg, tok), tok);
  EXPECT_EQ(parts.prefix, "# components.schemas: Pet, Error\n#\nopenapi: 3.0.0\n");
  cfg.include_components = false;
  EXPECT_EQ(decode_prompt(build_prompt(tc, doc, cfg, tok), tok).prefix, tc.prefix);
}

TEST(AllocateBudget, UnusedPrefixFlowsToSuffix) {
  auto [p, s] = allocate_budget(1000, 5000, config(FimFormat::psm, 4096));
  EXPECT_EQ(p, 1000u);
  EXPECT_EQ(s, 3093u);
}

TEST(AllocateBudget, UnusedSuffixFlowsToPrefix) {
  auto [p, s] = allocate_budget(5000, 10, config(FimFormat::psm, 4096));
  EXPECT_EQ(p, 4083u);
  EXPECT_EQ(s, 10u);
}

TEST(AllocateBudget, UnderBudgetIsUntouched) {
  auto [p, s] = allocate_budget(30, 40, config(FimFormat::psm, 4096));
  EXPECT_EQ(p, 30u);
  EXPECT_EQ(s, 40u);
}

TEST(TrimContext, SkewedRatioWithByteTokenizer) {
  ByteTokenizer tok;
  std::string prefix(5000, 'p'), suffix(5000, 's');
  prefix.back() = 'P';
  suffix.front() = 'S';
  auto t = trim_context_tokens(prefix, suffix, config(FimFormat::psm, 1024, 0.9), tok);
  EXPECT_EQ(t.prefix_tokens.size(), 918u);
  EXPECT_EQ(t.suffix_tokens.size(), 103u);
  EXPECT_EQ(t.prefix.back(), 'P');
  EXPECT_EQ(t.suffix.front(), 'S');
  EXPECT_TRUE(t.truncated_prefix);
  EXPECT_TRUE(t.truncated_suffix);
}

TEST(TrimContext, FlagsFalseUnderBudget) {
  ByteTokenizer tok;
  auto t = trim_context_tokens("abc", "def", config(FimFormat::psm), tok);
  EXPECT_EQ(t.prefix, "abc");
  EXPECT_EQ(t.suffix, "def");
  EXPECT_FALSE(t.truncated_prefix);
  EXPECT_FALSE(t.truncated_suffix);
}

TEST(ComponentsComment, Formats) {
  ComponentIndex one;
  one.by_section = {{"schemas", {"Pet", "Error"}}};
  EXPECT_EQ(components_comment(one), "# components.schemas: Pet, Error\n#\n");
  EXPECT_EQ(components_comment(ComponentIndex{}), "");
  ComponentIndex two;
  two.by_section = {{"schemas", {"A"}}, {"responses", {"NotFound", "Gone"}}};
  EXPECT_EQ(components_comment(two), "# components.schemas: A\n# components.responses: NotFound, Gone\n#\n");
}

// Random prompts with both tokenizers: size bound, sentinel layout, kept text
// sits next to the cursor, PSM and SPM carry the same content.
TEST(PromptProperty, BoundsAndContent) {
  auto sub = SubwordTokenizer::load(testing::data_dir() / "test_vocab.json");
  ByteTokenizer bytes;
  DeterministicRng rng(31);
  for (int i = 0; i < 400; ++i) {
    const Tokenizer& tok = i % 2 == 0 ? static_cast<const Tokenizer&>(bytes) : *sub;
    auto prefix = testing::random_utf8(rng, 120);
    auto suffix = testing::random_utf8(rng, 120);
    auto c = static_cast<std::size_t>(rng.between(16, 120));
    double r = static_cast<double>(rng.between(1, 9)) / 10.0;
    auto psm = build_prompt(prefix, suffix, config(FimFormat::psm, c, r), tok);
    auto spm = build_prompt(prefix, suffix, config(FimFormat::spm, c, r), tok);
    ASSERT_LE(psm.tokens.size(), c);
    ASSERT_LE(spm.tokens.size(), c);
    ASSERT_EQ(psm.tokens[0], tok.sentinel(Sentinel::pre));
    ASSERT_EQ(psm.tokens.back(), tok.sentinel(Sentinel::mid));
    ASSERT_EQ(spm.tokens[1], tok.sentinel(Sentinel::suf));
    for (Sentinel s : {Sentinel::pre, Sentinel::suf, Sentinel::mid}) {
      ASSERT_EQ(std::count(psm.tokens.begin(), psm.tokens.end(), tok.sentinel(s)), 1);
    }
    auto a = psm.tokens, b = spm.tokens;
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    ASSERT_EQ(a, b);
    auto parts = decode_prompt(psm, tok);
    ASSERT_TRUE(prefix.size() >= parts.prefix.size() &&
                prefix.compare(prefix.size() - parts.prefix.size(), parts.prefix.size(), parts.prefix) == 0);
    ASSERT_EQ(suffix.compare(0, parts.suffix.size(), parts.suffix), 0);
    if (!psm.truncated_prefix) ASSERT_EQ(parts.prefix, prefix);
    if (!psm.truncated_suffix) ASSERT_EQ(parts.suffix, suffix);
    auto spm_parts = decode_prompt(spm, tok);
    ASSERT_EQ(spm_parts.prefix, parts.prefix);
    ASSERT_EQ(spm_parts.suffix, parts.suffix);
  }
}

TEST(PromptProperty, BalancedSplitAtHalfRatio) {
  ByteTokenizer tok;
  std::string big(20000, 'x');
  for (std::size_t c : {1024u, 2048u, 3072u, 4096u, 5120u, 6144u, 7168u}) {
    auto p = build_prompt(big, big, config(FimFormat::psm, c, 0.5), tok);
    EXPECT_EQ(p.tokens.size(), c);
    auto diff = static_cast<long>(p.prefix_tokens_used) - static_cast<long>(p.suffix_tokens_used);
    EXPECT_LE(std::labs(diff), 1);
  }
}

TEST(FimFormat, Parses) {
  EXPECT_EQ(parse_fim_format("spm"), FimFormat::spm);
  EXPECT_EQ(parse_fim_format("PSM"), FimFormat::psm);
  EXPECT_THROW(parse_fim_format("msp"), std::invalid_argument);
}

}  // namespace
}  // namespace oasfim
