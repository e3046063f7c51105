#include "oasfim/tokenizer.hpp"

#include <algorithm>
#include <fstream>
#include <iterator>
#include <limits>
#include <set>

#include <nlohmann/json.hpp>

#include "oasfim/error.hpp"

namespace oasfim {

std::string_view to_string(Sentinel s) {
  switch (s) {
    case Sentinel::pre:
      return "PRE";
    case Sentinel::suf:
      return "SUF";
    case Sentinel::mid:
      return "MID";
    case Sentinel::eot:
      return "EOT";
  }
  return "?";
}

TokenId SentinelIds::operator[](Sentinel s) const {
  switch (s) {
    case Sentinel::pre:
      return pre;
    case Sentinel::suf:
      return suf;
    case Sentinel::mid:
      return mid;
    case Sentinel::eot:
      return eot;
  }
  return eot;
}

std::array<std::string, 4> default_sentinel_texts() { return {"<PRE>", "<SUF>", "<MID>", "<EOT>"}; }

Tokenizer::Tokenizer(SentinelIds sentinels, std::array<std::string, 4> sentinel_texts)
    : sentinels_(sentinels), sentinel_texts_(std::move(sentinel_texts)) {
  std::set<TokenId> ids = {sentinels_.pre, sentinels_.suf, sentinels_.mid, sentinels_.eot};
  if (ids.size() != 4) throw Error("sentinel ids must be pairwise distinct");
}

std::string Tokenizer::render(std::span<const TokenId> tokens, EncodeOptions options) const {
  std::string out;
  std::size_t run_start = 0;
  auto flush = [&](std::size_t end) {
    if (end > run_start) out += decode(tokens.subspan(run_start, end - run_start), options);
  };
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (!is_sentinel(tokens[i])) continue;
    flush(i);
    for (int s = 0; s < 4; ++s) {
      if (sentinels_[static_cast<Sentinel>(s)] == tokens[i]) out += sentinel_texts_[s];
    }
    run_start = i + 1;
  }
  flush(tokens.size());
  return out;
}

// ---------------------------------------------------------------------------

ByteTokenizer::ByteTokenizer() : Tokenizer({256, 257, 258, 259}, default_sentinel_texts()) {}

std::vector<TokenId> ByteTokenizer::encode(std::string_view text, EncodeOptions) const {
  std::vector<TokenId> out;
  out.reserve(text.size());
  for (unsigned char c : text) out.push_back(c);
  return out;
}

std::string ByteTokenizer::decode(std::span<const TokenId> tokens, EncodeOptions) const {
  std::string out;
  out.reserve(tokens.size());
  for (TokenId t : tokens) {
    if (t > 255) throw UnknownToken("token id " + std::to_string(t) + " is not a byte token");
    out.push_back(static_cast<char>(t));
  }
  return out;
}

// ---------------------------------------------------------------------------

namespace {

constexpr std::string_view kSpaceMarker = "\xE2\x96\x81";  // U+2581

std::string piece_bytes(const std::string& piece) {
  std::string out;
  for (std::size_t i = 0; i < piece.size();) {
    if (piece.compare(i, kSpaceMarker.size(), kSpaceMarker) == 0) {
      out.push_back(' ');
      i += kSpaceMarker.size();
    } else {
      out.push_back(piece[i++]);
    }
  }
  return out;
}

int byte_piece_value(const std::string& piece) {
  if (piece.size() != 6 || piece.compare(0, 3, "<0x") != 0 || piece[5] != '>') return -1;
  int v = 0;
  for (int i = 3; i < 5; ++i) {
    char c = piece[static_cast<std::size_t>(i)];
    int d = (c >= '0' && c <= '9')   ? c - '0'
            : (c >= 'a' && c <= 'f') ? c - 'a' + 10
            : (c >= 'A' && c <= 'F') ? c - 'A' + 10
                                     : -1;
    if (d < 0) return -1;
    v = v * 16 + d;
  }
  return v;
}

}  // namespace

SubwordTokenizer::SubwordTokenizer(std::string name, SentinelIds sentinels,
                                   std::array<std::string, 4> sentinel_texts, bool add_dummy_prefix)
    : Tokenizer(sentinels, std::move(sentinel_texts)), name_(std::move(name)), add_dummy_prefix_(add_dummy_prefix) {
  trie_.emplace_back();
}

void SubwordTokenizer::add_piece(const std::string& bytes, TokenId id) {
  std::uint32_t node = 0;
  for (unsigned char c : bytes) {
    auto it = trie_[node].next.find(c);
    if (it == trie_[node].next.end()) {
      trie_.emplace_back();
      auto child = static_cast<std::uint32_t>(trie_.size() - 1);
      trie_[node].next.emplace(c, child);
      node = child;
    } else {
      node = it->second;
    }
  }
  if (trie_[node].token < 0) trie_[node].token = id;
}

std::shared_ptr<const SubwordTokenizer> SubwordTokenizer::from_json_text(std::string_view json_text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(json_text);
  } catch (const nlohmann::json::exception& e) {
    throw Error(std::string("invalid vocabulary file: ") + e.what());
  }
  if (!j.contains("pieces") || !j["pieces"].is_array()) throw Error("vocabulary file needs a 'pieces' array");
  if (!j.contains("sentinel_ids") || !j["sentinel_ids"].is_object()) {
    throw Error("vocabulary file needs a 'sentinel_ids' object");
  }
  const auto& sj = j["sentinel_ids"];
  SentinelIds ids;
  try {
    ids = {sj.at("PRE").get<TokenId>(), sj.at("SUF").get<TokenId>(), sj.at("MID").get<TokenId>(),
           sj.at("EOT").get<TokenId>()};
  } catch (const nlohmann::json::exception& e) {
    throw Error(std::string("sentinel_ids must map PRE, SUF, MID, EOT to ids: ") + e.what());
  }
  auto texts = default_sentinel_texts();
  if (j.contains("sentinel_texts")) {
    const auto& st = j["sentinel_texts"];
    for (int s = 0; s < 4; ++s) {
      auto key = std::string(to_string(static_cast<Sentinel>(s)));
      if (st.contains(key)) texts[static_cast<std::size_t>(s)] = st[key].get<std::string>();
    }
  }
  auto tok = std::shared_ptr<SubwordTokenizer>(new SubwordTokenizer(
      j.value("name", std::string("subword")), ids, texts, j.value("add_dummy_prefix", false)));

  const auto& pieces = j["pieces"];
  TokenId max_sentinel = std::max({ids.pre, ids.suf, ids.mid, ids.eot});
  std::size_t size = std::max<std::size_t>(pieces.size(), static_cast<std::size_t>(max_sentinel) + 1);
  tok->id_to_bytes_.assign(size, std::string());
  tok->decodable_.assign(size, false);
  std::array<bool, 256> have_byte{};
  for (std::size_t id = 0; id < pieces.size(); ++id) {
    auto tid = static_cast<TokenId>(id);
    if (ids.contains(tid)) continue;
    auto piece = pieces[id].get<std::string>();
    if (int b = byte_piece_value(piece); b >= 0) {
      if (!have_byte[static_cast<std::size_t>(b)]) {
        have_byte[static_cast<std::size_t>(b)] = true;
        tok->byte_token_[static_cast<std::size_t>(b)] = tid;
      }
      tok->id_to_bytes_[id] = std::string(1, static_cast<char>(b));
      tok->decodable_[id] = true;
      continue;
    }
    std::string bytes = piece_bytes(piece);
    if (bytes.empty()) continue;
    tok->id_to_bytes_[id] = bytes;
    tok->decodable_[id] = true;
    tok->add_piece(bytes, tid);
  }
  for (int b = 0; b < 256; ++b) {
    if (have_byte[static_cast<std::size_t>(b)]) continue;
    auto tid = static_cast<TokenId>(tok->id_to_bytes_.size());
    tok->id_to_bytes_.emplace_back(1, static_cast<char>(b));
    tok->decodable_.push_back(true);
    tok->byte_token_[static_cast<std::size_t>(b)] = tid;
  }
  return tok;
}

std::shared_ptr<const SubwordTokenizer> SubwordTokenizer::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open vocabulary file " + path.string());
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return from_json_text(text);
}

std::vector<TokenId> SubwordTokenizer::encode(std::string_view text, EncodeOptions options) const {
  std::string buf;
  if (add_dummy_prefix_ && !options.suppress_leading_space && !text.empty()) {
    buf.reserve(text.size() + 1);
    buf.push_back(' ');
    buf.append(text);
    text = buf;
  }
  const std::size_t n = text.size();
  constexpr auto kInf = std::numeric_limits<std::uint32_t>::max();
  // best[i]: fewest tokens for text[i..n); step[i]: (length, token) of the first piece.
  std::vector<std::uint32_t> best(n + 1, kInf);
  std::vector<std::pair<std::uint32_t, TokenId>> step(n + 1, {0, 0});
  best[n] = 0;
  for (std::size_t i = n; i-- > 0;) {
    auto c = static_cast<unsigned char>(text[i]);
    best[i] = best[i + 1] + 1;
    step[i] = {1, byte_token_[c]};
    std::uint32_t node = 0;
    for (std::size_t k = i; k < n; ++k) {
      auto it = trie_[node].next.find(static_cast<unsigned char>(text[k]));
      if (it == trie_[node].next.end()) break;
      node = it->second;
      if (trie_[node].token < 0) continue;
      auto len = static_cast<std::uint32_t>(k - i + 1);
      auto cost = best[k + 1] + 1;
      if (cost < best[i] || (cost == best[i] && len > step[i].first)) {
        best[i] = cost;
        step[i] = {len, static_cast<TokenId>(trie_[node].token)};
      }
    }
  }
  std::vector<TokenId> out;
  out.reserve(n > 0 ? best[0] : 0);
  for (std::size_t i = 0; i < n; i += step[i].first) out.push_back(step[i].second);
  return out;
}

std::string SubwordTokenizer::decode(std::span<const TokenId> tokens, EncodeOptions options) const {
  std::string out;
  for (TokenId t : tokens) {
    if (t >= id_to_bytes_.size() || !decodable_[t] || is_sentinel(t)) {
      throw UnknownToken("token id " + std::to_string(t) + " is not in the vocabulary");
    }
    out += id_to_bytes_[t];
  }
  if (add_dummy_prefix_ && !options.suppress_leading_space && !out.empty() && out[0] == ' ') out.erase(0, 1);
  return out;
}

std::shared_ptr<const Tokenizer> make_tokenizer(std::string_view selector) {
  if (selector.empty() || selector == "bytes") return std::make_shared<ByteTokenizer>();
  return SubwordTokenizer::load(std::filesystem::path(selector));
}

}  // namespace oasfim
