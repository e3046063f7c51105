#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "oasfim/doc_node.hpp"
#include "oasfim/document.hpp"

namespace oasfim {

enum class ChangeKind { added, removed, modified };
enum class Significance { significant, insignificant };
enum class Verdict { identical, insignificant_only, different };

std::string_view to_string(ChangeKind kind);
std::string_view to_string(Significance significance);
std::string_view to_string(Verdict verdict);

struct Change {
  NodePath path;
  ChangeKind kind = ChangeKind::modified;
  NodePtr before;  // null for added
  NodePtr after;   // null for removed
  Significance significance = Significance::significant;
};

struct ChangeSet {
  std::vector<Change> changes;
  Verdict verdict = Verdict::identical;

  std::size_t count(Significance s) const;
};

/// "KIND PATH SIGNIFICANCE", e.g. "modified /info/title insignificant".
std::string format_change(const Change& change);
std::string format_changeset(const ChangeSet& changes);

/// Recursive shape of a value: scalars by type tag, mappings by key to
/// shape, sequences by the set of distinct element shapes.
class TypeShape {
 public:
  NodeKind kind() const noexcept { return kind_; }
  ScalarType scalar_type() const noexcept { return scalar_type_; }
  const std::vector<std::pair<std::string, TypeShape>>& fields() const noexcept { return fields_; }
  const std::vector<TypeShape>& elements() const noexcept { return elements_; }

  std::string to_string() const;

  friend TypeShape structural_type(const DocNode& node);
  friend int compare(const TypeShape& a, const TypeShape& b);

  bool operator==(const TypeShape& other) const { return compare(*this, other) == 0; }
  bool operator<(const TypeShape& other) const { return compare(*this, other) < 0; }

 private:
  NodeKind kind_ = NodeKind::scalar;
  ScalarType scalar_type_ = ScalarType::null;
  std::vector<std::pair<std::string, TypeShape>> fields_;  // sorted by key
  std::vector<TypeShape> elements_;                        // sorted, unique
};

TypeShape structural_type(const DocNode& node);
int compare(const TypeShape& a, const TypeShape& b);

/// Keys whose edits never change the meaning of a definition.
bool is_subjective_key(std::string_view key);

/// Applies the significance heuristics to a single change: subjective
/// fields (description, summary, title), vendor extensions (x-*), and
/// example edits that keep the structural type are insignificant.
Significance classify_change(const Change& change);

/// Node-level difference of two trees. Mappings are compared regardless of
/// key order; sequences of parameter-like objects are matched by
/// (name, in), other sequences positionally; sequences inside examples
/// are compared as one value.
ChangeSet diff_trees(const NodePtr& original, const NodePtr& candidate);

/// Callers pass ref-resolved documents.
ChangeSet diff(const ApiDocument& original, const ApiDocument& candidate);

bool is_semantically_identical(const ApiDocument& original, const ApiDocument& candidate);

}  // namespace oasfim
