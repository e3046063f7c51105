#include "oasfim/prompting.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "oasfim/error.hpp"

namespace oasfim {

std::string_view to_string(FimFormat format) { return format == FimFormat::psm ? "psm" : "spm"; }

FimFormat parse_fim_format(std::string_view text) {
  if (text == "psm" || text == "PSM") return FimFormat::psm;
  if (text == "spm" || text == "SPM") return FimFormat::spm;
  throw std::invalid_argument("unknown infilling format '" + std::string(text) + "' (expected psm or spm)");
}

void PromptConfig::validate() const {
  if (context_size < 16) throw std::invalid_argument("context_size must be at least 16 tokens");
  if (!(prefix_ratio > 0.0 && prefix_ratio < 1.0)) {
    throw std::invalid_argument("prefix_ratio must lie strictly between 0 and 1");
  }
}

std::pair<std::size_t, std::size_t> allocate_budget(std::size_t prefix_len, std::size_t suffix_len,
                                                    const PromptConfig& config) {
  const std::size_t budget = config.context_size > 3 ? config.context_size - 3 : 0;
  // The epsilon keeps ratios like 0.7 from flooring one token short.
  auto prefix_budget =
      static_cast<std::size_t>(std::floor(static_cast<double>(budget) * config.prefix_ratio + 1e-9));
  prefix_budget = std::min(prefix_budget, budget);
  std::size_t suffix_budget = budget - prefix_budget;
  if (prefix_len < prefix_budget) {
    suffix_budget += prefix_budget - prefix_len;
    prefix_budget = prefix_len;
  }
  if (suffix_len < suffix_budget) {
    prefix_budget += suffix_budget - suffix_len;
    suffix_budget = suffix_len;
  }
  return {std::min(prefix_budget, prefix_len), std::min(suffix_budget, suffix_len)};
}

TrimmedContext trim_context_tokens(std::string_view prefix, std::string_view suffix, const PromptConfig& config,
                                   const Tokenizer& tokenizer) {
  const EncodeOptions suffix_opts{.suppress_leading_space = true};
  auto prefix_tokens = tokenizer.encode(prefix);
  auto suffix_tokens = tokenizer.encode(suffix, suffix_opts);
  auto [keep_prefix, keep_suffix] = allocate_budget(prefix_tokens.size(), suffix_tokens.size(), config);

  TrimmedContext out;
  out.truncated_prefix = keep_prefix < prefix_tokens.size();
  out.truncated_suffix = keep_suffix < suffix_tokens.size();
  out.prefix_tokens.assign(prefix_tokens.end() - static_cast<std::ptrdiff_t>(keep_prefix), prefix_tokens.end());
  out.suffix_tokens.assign(suffix_tokens.begin(), suffix_tokens.begin() + static_cast<std::ptrdiff_t>(keep_suffix));
  // A truncated prefix no longer starts with the tokenizer's virtual space.
  out.prefix = out.truncated_prefix ? tokenizer.decode(out.prefix_tokens, suffix_opts)
                                    : tokenizer.decode(out.prefix_tokens);
  out.suffix = tokenizer.decode(out.suffix_tokens, suffix_opts);
  return out;
}

std::pair<std::string, std::string> trim_context(std::string_view prefix, std::string_view suffix,
                                                 const PromptConfig& config, const Tokenizer& tokenizer) {
  auto t = trim_context_tokens(prefix, suffix, config, tokenizer);
  return {std::move(t.prefix), std::move(t.suffix)};
}

std::string components_comment(const ComponentIndex& index) {
  if (index.empty()) return {};
  std::string out;
  for (const auto& [section, names] : index.by_section) {
    out += "# components." + section + ":";
    for (std::size_t i = 0; i < names.size(); ++i) {
      out += i == 0 ? " " : ", ";
      out += names[i];
    }
    out += "\n";
  }
  out += "#\n";
  return out;
}

Prompt build_prompt(std::string_view prefix, std::string_view suffix, const PromptConfig& config,
                    const Tokenizer& tokenizer, const ComponentIndex* components) {
  std::string augmented;
  if (config.include_components && components != nullptr) {
    augmented = components_comment(*components);
    augmented.append(prefix);
    prefix = augmented;
  }
  std::size_t needed = 3 + (prefix.empty() ? 0 : 1) + (suffix.empty() ? 0 : 1);
  if (config.context_size < needed) {
    throw BudgetTooSmall("context size " + std::to_string(config.context_size) + " cannot hold " +
                         std::to_string(needed) + " tokens (sentinels plus one per non-empty side)");
  }
  config.validate();

  auto trimmed = trim_context_tokens(prefix, suffix, config, tokenizer);
  const auto& sent = tokenizer.sentinels();
  Prompt p;
  p.format = config.format;
  p.prefix_tokens_used = trimmed.prefix_tokens.size();
  p.suffix_tokens_used = trimmed.suffix_tokens.size();
  p.truncated_prefix = trimmed.truncated_prefix;
  p.truncated_suffix = trimmed.truncated_suffix;
  auto& t = p.tokens;
  t.reserve(3 + p.prefix_tokens_used + p.suffix_tokens_used);
  if (config.format == FimFormat::psm) {
    t.push_back(sent.pre);
    t.insert(t.end(), trimmed.prefix_tokens.begin(), trimmed.prefix_tokens.end());
    t.push_back(sent.suf);
    t.insert(t.end(), trimmed.suffix_tokens.begin(), trimmed.suffix_tokens.end());
    t.push_back(sent.mid);
  } else {
    t.push_back(sent.pre);
    t.push_back(sent.suf);
    t.insert(t.end(), trimmed.suffix_tokens.begin(), trimmed.suffix_tokens.end());
    t.push_back(sent.mid);
    t.insert(t.end(), trimmed.prefix_tokens.begin(), trimmed.prefix_tokens.end());
  }
  return p;
}

Prompt build_prompt(const TestCase& test_case, const ApiDocument& doc, const PromptConfig& config,
                    const Tokenizer& tokenizer) {
  ComponentIndex index;
  if (config.include_components) index = list_components(doc);
  return build_prompt(test_case.prefix, test_case.suffix, config, tokenizer, &index);
}

PromptParts decode_prompt(const Prompt& prompt, const Tokenizer& tokenizer) {
  const auto& s = prompt.tokens;
  const EncodeOptions suppressed{.suppress_leading_space = true};
  const EncodeOptions prefix_opts = prompt.truncated_prefix ? suppressed : EncodeOptions{};
  auto span = std::span<const TokenId>(s);
  auto pos = [&](TokenId id) {
    auto it = std::find(s.begin(), s.end(), id);
    if (it == s.end()) throw Error("prompt is missing a sentinel");
    return static_cast<std::size_t>(it - s.begin());
  };
  std::size_t suf = pos(tokenizer.sentinel(Sentinel::suf));
  std::size_t mid = pos(tokenizer.sentinel(Sentinel::mid));
  PromptParts parts;
  if (prompt.format == FimFormat::psm) {
    parts.prefix = tokenizer.decode(span.subspan(1, suf - 1), prefix_opts);
    parts.suffix = tokenizer.decode(span.subspan(suf + 1, mid - suf - 1), suppressed);
  } else {
    parts.suffix = tokenizer.decode(span.subspan(2, mid - 2), suppressed);
    parts.prefix = tokenizer.decode(span.subspan(mid + 1), prefix_opts);
  }
  return parts;
}

std::string render_prompt_text(const Prompt& prompt, const Tokenizer& tokenizer) {
  auto parts = decode_prompt(prompt, tokenizer);
  const auto& pre = tokenizer.sentinel_text(Sentinel::pre);
  const auto& suf = tokenizer.sentinel_text(Sentinel::suf);
  const auto& mid = tokenizer.sentinel_text(Sentinel::mid);
  if (prompt.format == FimFormat::psm) return pre + parts.prefix + suf + parts.suffix + mid;
  return pre + suf + parts.suffix + mid + parts.prefix;
}

}  // namespace oasfim
