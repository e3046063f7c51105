#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace oasfim {

using TokenId = std::uint32_t;

enum class Sentinel { pre = 0, suf = 1, mid = 2, eot = 3 };

std::string_view to_string(Sentinel s);

struct SentinelIds {
  TokenId pre = 0;
  TokenId suf = 0;
  TokenId mid = 0;
  TokenId eot = 0;

  TokenId operator[](Sentinel s) const;
  bool contains(TokenId id) const { return id == pre || id == suf || id == mid || id == eot; }
};

struct EncodeOptions {
  /// Do not inject the virtual leading space some subword vocabularies add
  /// before the first piece. Used for suffix and middle segments.
  bool suppress_leading_space = false;
};

/// Text <-> token codec with infilling sentinels. Implementations are
/// immutable after construction and safe to share between threads.
class Tokenizer {
 public:
  virtual ~Tokenizer() = default;

  virtual std::string name() const = 0;
  virtual std::size_t vocab_size() const = 0;

  /// Never yields sentinel ids.
  virtual std::vector<TokenId> encode(std::string_view text, EncodeOptions options = {}) const = 0;

  /// Inverse of encode() called with the same options. Throws UnknownToken
  /// for sentinel ids and ids outside the vocabulary.
  virtual std::string decode(std::span<const TokenId> tokens, EncodeOptions options = {}) const = 0;

  virtual std::size_t count_tokens(std::string_view text, EncodeOptions options = {}) const {
    return encode(text, options).size();
  }

  const SentinelIds& sentinels() const noexcept { return sentinels_; }
  TokenId sentinel(Sentinel s) const { return sentinels_[s]; }
  bool is_sentinel(TokenId id) const noexcept { return sentinels_.contains(id); }

  /// Text used for a sentinel when a token sequence is rendered as a string
  /// (e.g. "<PRE>").
  const std::string& sentinel_text(Sentinel s) const { return sentinel_texts_[static_cast<int>(s)]; }

  /// Renders a token sequence that may contain sentinels. Content runs are
  /// decoded with `options`.
  std::string render(std::span<const TokenId> tokens, EncodeOptions options = {}) const;

 protected:
  Tokenizer(SentinelIds sentinels, std::array<std::string, 4> sentinel_texts);

 private:
  SentinelIds sentinels_;
  std::array<std::string, 4> sentinel_texts_;
};

std::array<std::string, 4> default_sentinel_texts();

/// One token per byte; sentinels are 256..259.
class ByteTokenizer final : public Tokenizer {
 public:
  ByteTokenizer();

  std::string name() const override { return "bytes"; }
  std::size_t vocab_size() const override { return 260; }
  std::vector<TokenId> encode(std::string_view text, EncodeOptions options = {}) const override;
  std::string decode(std::span<const TokenId> tokens, EncodeOptions options = {}) const override;
  std::size_t count_tokens(std::string_view text, EncodeOptions = {}) const override { return text.size(); }
};

/// Subword codec loaded from a vocabulary file:
///
///   {"name": "...", "pieces": ["a", "▁the", "<0x0A>", ...],
///    "sentinel_ids": {"PRE": 0, "SUF": 1, "MID": 2, "EOT": 3},
///    "add_dummy_prefix": false}
///
/// A piece's id is its index. "▁" stands for a space and "<0xNN>"
/// pieces are byte tokens. Bytes without a byte piece get implicit ids
/// after the last used id, so every string is encodable. Encoding picks a
/// segmentation with the fewest tokens (longest first piece on ties).
class SubwordTokenizer final : public Tokenizer {
 public:
  static std::shared_ptr<const SubwordTokenizer> load(const std::filesystem::path& path);
  static std::shared_ptr<const SubwordTokenizer> from_json_text(std::string_view json);

  std::string name() const override { return name_; }
  std::size_t vocab_size() const override { return id_to_bytes_.size(); }
  bool add_dummy_prefix() const noexcept { return add_dummy_prefix_; }
  std::vector<TokenId> encode(std::string_view text, EncodeOptions options = {}) const override;
  std::string decode(std::span<const TokenId> tokens, EncodeOptions options = {}) const override;

 private:
  struct TrieNode {
    std::unordered_map<unsigned char, std::uint32_t> next;
    std::int64_t token = -1;
  };

  SubwordTokenizer(std::string name, SentinelIds sentinels, std::array<std::string, 4> sentinel_texts,
                   bool add_dummy_prefix);
  void add_piece(const std::string& bytes, TokenId id);

  std::string name_;
  bool add_dummy_prefix_ = false;
  std::vector<std::string> id_to_bytes_;
  std::vector<bool> decodable_;
  std::array<TokenId, 256> byte_token_{};
  std::vector<TrieNode> trie_;
};

/// "bytes" selects ByteTokenizer; anything else is a vocabulary file path.
std::shared_ptr<const Tokenizer> make_tokenizer(std::string_view selector);

}  // namespace oasfim
