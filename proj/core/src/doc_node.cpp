#include "oasfim/doc_node.hpp"

#include <charconv>
#include <cmath>
#include <cstring>
#include <functional>
#include <sstream>
#include <stdexcept>
#include <unordered_set>

namespace oasfim {

namespace {

std::uint64_t mix(std::uint64_t x) {
  x ^= x >> 30;
  x *= 0xbf58476d1ce4e5b9ULL;
  x ^= x >> 27;
  x *= 0x94d049bb133111ebULL;
  x ^= x >> 31;
  return x;
}

std::uint64_t hash_bytes(std::string_view s) {
  // FNV-1a, finished with mix() for avalanche.
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return mix(h);
}

std::uint64_t hash_scalar(const Scalar& s) {
  std::uint64_t h = mix(static_cast<std::uint64_t>(s.type) + 1);
  if (s.type == ScalarType::number) {
    double v = s.number == 0.0 ? 0.0 : s.number;
    std::uint64_t bits;
    static_assert(sizeof(bits) == sizeof(v));
    std::memcpy(&bits, &v, sizeof(v));
    return mix(h ^ bits);
  }
  return mix(h ^ hash_bytes(s.text));
}

double parse_number_literal(const std::string& literal) {
  std::string t = literal;
  if (!t.empty() && t[0] == '+') t.erase(0, 1);
  if (t == ".inf" || t == ".Inf" || t == ".INF") return HUGE_VAL;
  if (t == "-.inf" || t == "-.Inf" || t == "-.INF") return -HUGE_VAL;
  if (t == ".nan" || t == ".NaN" || t == ".NAN") return std::nan("");
  int base = 10;
  bool neg = false;
  std::string_view digits = t;
  if (!digits.empty() && digits[0] == '-') {
    neg = true;
    digits.remove_prefix(1);
  }
  if (digits.size() > 2 && digits[0] == '0' && (digits[1] == 'x' || digits[1] == 'o')) {
    base = digits[1] == 'x' ? 16 : 8;
    digits.remove_prefix(2);
    std::uint64_t v = 0;
    auto [p, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), v, base);
    if (ec != std::errc() || p != digits.data() + digits.size()) {
      throw std::invalid_argument("not a number literal: " + literal);
    }
    return neg ? -static_cast<double>(v) : static_cast<double>(v);
  }
  std::size_t pos = 0;
  double v = std::stod(t, &pos);
  if (pos != t.size()) throw std::invalid_argument("not a number literal: " + literal);
  return v;
}

}  // namespace

std::string_view to_string(NodeKind kind) {
  switch (kind) {
    case NodeKind::mapping:
      return "mapping";
    case NodeKind::sequence:
      return "sequence";
    case NodeKind::scalar:
      return "scalar";
  }
  return "?";
}

std::string_view to_string(ScalarType type) {
  switch (type) {
    case ScalarType::string:
      return "string";
    case ScalarType::number:
      return "number";
    case ScalarType::boolean:
      return "boolean";
    case ScalarType::null:
      return "null";
  }
  return "?";
}

Scalar Scalar::number_from_literal(std::string literal) {
  double v = parse_number_literal(literal);
  return {ScalarType::number, std::move(literal), v};
}

Scalar Scalar::number_from_double(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return {ScalarType::number, os.str(), v};
}

Scalar Scalar::number_from_int(std::int64_t v) {
  return {ScalarType::number, std::to_string(v), static_cast<double>(v)};
}

bool Scalar::operator==(const Scalar& other) const {
  if (type != other.type) return false;
  if (type == ScalarType::number) {
    if (std::isnan(number) && std::isnan(other.number)) return true;
    if (number != other.number) return false;
    // Integers beyond double precision still differ by their literal.
    if (std::fabs(number) >= 9007199254740992.0) return text == other.text;
    return true;
  }
  return text == other.text;
}

NodePtr DocNode::make_scalar(Scalar value) {
  auto n = std::shared_ptr<DocNode>(new DocNode());
  n->kind_ = NodeKind::scalar;
  n->scalar_ = std::move(value);
  n->hash_ = hash_scalar(n->scalar_);
  return n;
}

NodePtr DocNode::make_mapping(std::vector<MappingEntry> entries) {
  auto n = std::shared_ptr<DocNode>(new DocNode());
  n->kind_ = NodeKind::mapping;
  // Commutative combination so key order does not change the hash.
  std::uint64_t acc = 0;
  std::size_t count = 1;
  for (const auto& [key, child] : entries) {
    if (!child) throw std::invalid_argument("null child in mapping");
    acc += mix(hash_bytes(key) ^ mix(child->structural_hash() + 0x9e3779b97f4a7c15ULL));
    count += child->node_count();
  }
  n->entries_ = std::move(entries);
  n->hash_ = mix(acc ^ 0x6d61707069ULL);
  n->count_ = count;
  return n;
}

NodePtr DocNode::make_sequence(std::vector<NodePtr> items) {
  auto n = std::shared_ptr<DocNode>(new DocNode());
  n->kind_ = NodeKind::sequence;
  std::uint64_t acc = 0x73657175ULL;
  std::size_t count = 1;
  for (const auto& child : items) {
    if (!child) throw std::invalid_argument("null item in sequence");
    acc = mix(acc * 31 + child->structural_hash());
    count += child->node_count();
  }
  n->items_ = std::move(items);
  n->hash_ = acc;
  n->count_ = count;
  return n;
}

const DocNode* DocNode::find(std::string_view key) const {
  for (const auto& [k, v] : entries_) {
    if (k == key) return v.get();
  }
  return nullptr;
}

NodePtr DocNode::find_ptr(std::string_view key) const {
  for (const auto& [k, v] : entries_) {
    if (k == key) return v;
  }
  return nullptr;
}

std::optional<std::string> DocNode::string_at(std::string_view key) const {
  const DocNode* n = find(key);
  if (n == nullptr || !n->is_scalar() || n->scalar().type != ScalarType::string) return std::nullopt;
  return n->scalar().text;
}

namespace {

struct PairHash {
  std::size_t operator()(const std::pair<const DocNode*, const DocNode*>& p) const noexcept {
    return std::hash<const void*>()(p.first) * 31 + std::hash<const void*>()(p.second);
  }
};

using EqualMemo = std::unordered_set<std::pair<const DocNode*, const DocNode*>, PairHash>;

bool equal_impl(const DocNode& a, const DocNode& b, EqualMemo& memo) {
  if (&a == &b) return true;
  if (a.kind() != b.kind() || a.structural_hash() != b.structural_hash()) return false;
  if (a.is_scalar()) return a.scalar() == b.scalar();
  if (a.size() != b.size()) return false;
  // Shared subtrees make the same pair recur; remember confirmed pairs.
  bool big = a.node_count() > 8;
  if (big && memo.count({&a, &b})) return true;
  bool eq = true;
  if (a.is_sequence()) {
    for (std::size_t i = 0; i < a.items().size() && eq; ++i) {
      eq = equal_impl(*a.items()[i], *b.items()[i], memo);
    }
  } else {
    for (const auto& [key, child] : a.entries()) {
      const DocNode* other = b.find(key);
      if (other == nullptr || !equal_impl(*child, *other, memo)) {
        eq = false;
        break;
      }
    }
  }
  if (eq && big) memo.insert({&a, &b});
  return eq;
}

}  // namespace

bool tree_equal(const DocNode& a, const DocNode& b) {
  EqualMemo memo;
  return equal_impl(a, b, memo);
}

bool tree_equal(const NodePtr& a, const NodePtr& b) {
  if (!a || !b) return a == b;
  return tree_equal(*a, *b);
}

std::string escape_pointer_token(std::string_view token) {
  std::string out;
  out.reserve(token.size());
  for (char c : token) {
    if (c == '~') {
      out += "~0";
    } else if (c == '/') {
      out += "~1";
    } else {
      out.push_back(c);
    }
  }
  return out;
}

std::string to_json_pointer(const NodePath& path) {
  if (path.empty()) return "/";
  std::string out;
  for (const auto& el : path) {
    out.push_back('/');
    if (const auto* key = std::get_if<std::string>(&el)) {
      out += escape_pointer_token(*key);
    } else {
      out += std::to_string(std::get<std::size_t>(el));
    }
  }
  return out;
}

}  // namespace oasfim
