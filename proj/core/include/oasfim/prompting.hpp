#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "oasfim/casegen.hpp"
#include "oasfim/document.hpp"
#include "oasfim/tokenizer.hpp"

namespace oasfim {

/// Infilling layouts: PSM is <PRE> prefix <SUF> suffix <MID>, SPM is
/// <PRE> <SUF> suffix <MID> prefix.
enum class FimFormat { psm, spm };

std::string_view to_string(FimFormat format);
FimFormat parse_fim_format(std::string_view text);

struct PromptConfig {
  FimFormat format = FimFormat::psm;
  std::size_t context_size = 4096;
  double prefix_ratio = 0.5;
  bool include_components = false;
  std::size_t generation_budget = 384;
  std::size_t line_cap = 15;

  /// Throws std::invalid_argument unless context_size >= 16 and
  /// 0 < prefix_ratio < 1.
  void validate() const;
};

struct Prompt {
  std::vector<TokenId> tokens;
  FimFormat format = FimFormat::psm;
  std::size_t prefix_tokens_used = 0;
  std::size_t suffix_tokens_used = 0;
  bool truncated_prefix = false;
  bool truncated_suffix = false;
};

/// Token-level result of budget trimming.
struct TrimmedContext {
  std::vector<TokenId> prefix_tokens;
  std::vector<TokenId> suffix_tokens;
  std::string prefix;
  std::string suffix;
  bool truncated_prefix = false;
  bool truncated_suffix = false;
};

/// Prefix and suffix token budgets for content lengths that need
/// `prefix_len` and `suffix_len` tokens. The prompt budget is
/// context_size - 3 (one slot per sentinel), split floor(B * ratio) /
/// remainder, with budget unused by one side given to the other.
std::pair<std::size_t, std::size_t> allocate_budget(std::size_t prefix_len, std::size_t suffix_len,
                                                    const PromptConfig& config);

/// Keeps the end of the prefix and the start of the suffix. Cuts fall on
/// token boundaries; the suffix is encoded without a leading space.
TrimmedContext trim_context_tokens(std::string_view prefix, std::string_view suffix, const PromptConfig& config,
                                   const Tokenizer& tokenizer);

std::pair<std::string, std::string> trim_context(std::string_view prefix, std::string_view suffix,
                                                 const PromptConfig& config, const Tokenizer& tokenizer);

/// "# components.<section>: a, b\n" per section, then "#\n". Empty index
/// gives an empty string.
std::string components_comment(const ComponentIndex& index);

/// Builds an infilling prompt. With include_components the components
/// comment of `doc` is prepended to the prefix before trimming. Throws
/// BudgetTooSmall when the context cannot hold the sentinels and one
/// token per non-empty side.
Prompt build_prompt(const TestCase& test_case, const ApiDocument& doc, const PromptConfig& config,
                    const Tokenizer& tokenizer);

Prompt build_prompt(std::string_view prefix, std::string_view suffix, const PromptConfig& config,
                    const Tokenizer& tokenizer, const ComponentIndex* components = nullptr);

/// Content spans of a prompt, decoded back to text.
struct PromptParts {
  std::string prefix;
  std::string suffix;
};

PromptParts decode_prompt(const Prompt& prompt, const Tokenizer& tokenizer);

/// The prompt as text, with sentinels written as their marker strings.
std::string render_prompt_text(const Prompt& prompt, const Tokenizer& tokenizer);

}  // namespace oasfim
