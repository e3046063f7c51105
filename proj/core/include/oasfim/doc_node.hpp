#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

namespace oasfim {

enum class NodeKind { mapping, sequence, scalar };

/// Type tag of a scalar as written in the source. A quoted "5" is a string.
enum class ScalarType { string, number, boolean, null };

std::string_view to_string(NodeKind kind);
std::string_view to_string(ScalarType type);

struct Scalar {
  ScalarType type = ScalarType::null;
  /// Canonical text: the string value, the number literal, "true"/"false", or "null".
  std::string text;
  /// Numeric value for ScalarType::number, used for value comparison (1 == 1.0).
  double number = 0.0;

  static Scalar string(std::string s) { return {ScalarType::string, std::move(s), 0.0}; }
  static Scalar boolean(bool b) { return {ScalarType::boolean, b ? "true" : "false", 0.0}; }
  static Scalar null() { return {ScalarType::null, "null", 0.0}; }
  /// Builds a number from its literal; the literal must parse as a YAML/JSON number.
  static Scalar number_from_literal(std::string literal);
  static Scalar number_from_double(double v);
  static Scalar number_from_int(std::int64_t v);

  bool operator==(const Scalar& other) const;
};

class DocNode;
using NodePtr = std::shared_ptr<const DocNode>;
using MappingEntry = std::pair<std::string, NodePtr>;

/// Immutable node of a parsed definition.
///
/// Nodes are shared between trees (resolved references point at the same
/// subtree), which is safe because nothing mutates a node after
/// construction. Every node caches a structural hash that ignores mapping
/// key order.
class DocNode {
 public:
  static NodePtr make_scalar(Scalar value);
  static NodePtr make_mapping(std::vector<MappingEntry> entries);
  static NodePtr make_sequence(std::vector<NodePtr> items);

  static NodePtr string(std::string s) { return make_scalar(Scalar::string(std::move(s))); }

  NodeKind kind() const noexcept { return kind_; }
  bool is_mapping() const noexcept { return kind_ == NodeKind::mapping; }
  bool is_sequence() const noexcept { return kind_ == NodeKind::sequence; }
  bool is_scalar() const noexcept { return kind_ == NodeKind::scalar; }

  const std::vector<MappingEntry>& entries() const noexcept { return entries_; }
  const std::vector<NodePtr>& items() const noexcept { return items_; }
  const Scalar& scalar() const noexcept { return scalar_; }

  /// Number of children (entries or items); zero for scalars.
  std::size_t size() const noexcept { return is_mapping() ? entries_.size() : items_.size(); }

  /// Child of a mapping by key, or nullptr.
  const DocNode* find(std::string_view key) const;
  NodePtr find_ptr(std::string_view key) const;

  /// Scalar string value of a child key, if the child exists and is a string.
  std::optional<std::string> string_at(std::string_view key) const;

  std::uint64_t structural_hash() const noexcept { return hash_; }
  /// Total number of nodes in this subtree, counting shared subtrees once per use.
  std::size_t node_count() const noexcept { return count_; }

 private:
  DocNode() = default;

  NodeKind kind_ = NodeKind::scalar;
  std::vector<MappingEntry> entries_;
  std::vector<NodePtr> items_;
  Scalar scalar_;
  std::uint64_t hash_ = 0;
  std::size_t count_ = 1;
};

/// Tree equality: mappings compare regardless of key order, sequences in
/// order, scalars by type tag and value.
bool tree_equal(const DocNode& a, const DocNode& b);
bool tree_equal(const NodePtr& a, const NodePtr& b);

/// One step of a path from the root: a mapping key or a sequence index.
using PathElement = std::variant<std::string, std::size_t>;
using NodePath = std::vector<PathElement>;

/// Renders a path as a JSON pointer ("/paths/~1pets/get").
std::string to_json_pointer(const NodePath& path);
/// Escapes a single reference token per RFC 6901.
std::string escape_pointer_token(std::string_view token);

}  // namespace oasfim
