#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "oasfim/doc_node.hpp"

namespace oasfim {

enum class SourceFormat { yaml, json };

std::string_view to_string(SourceFormat format);

/// A parsed OpenAPI definition: the normalized tree plus the original text.
class ApiDocument {
 public:
  ApiDocument(std::string raw_text, NodePtr root, SourceFormat format);

  const std::string& raw_text() const noexcept { return raw_text_; }
  const DocNode& root() const noexcept { return *root_; }
  const NodePtr& root_ptr() const noexcept { return root_; }
  SourceFormat source_format() const noexcept { return format_; }
  std::size_t line_count() const noexcept { return line_count_; }

 private:
  std::string raw_text_;
  NodePtr root_;
  SourceFormat format_;
  std::size_t line_count_;
};

/// Number of newline-delimited lines; a trailing partial line counts as one.
std::size_t count_lines(std::string_view text);

/// Parses YAML or JSON. Without a hint, text whose first non-whitespace
/// character is '{' is JSON, anything else YAML. YAML anchors, aliases and
/// merge keys are expanded. Throws ParseError.
ApiDocument parse_definition(std::string text, std::optional<SourceFormat> format_hint = std::nullopt);

/// Reads a .yaml/.yml/.json file; the extension picks the format.
ApiDocument load_definition(const std::filesystem::path& path);

/// Emits the tree in the given format. Strings are always quoted so type
/// tags survive a reparse.
std::string serialize(const DocNode& root, SourceFormat format);
std::string serialize(const ApiDocument& doc);
std::string serialize(const ApiDocument& doc, SourceFormat format);

struct Issue {
  std::string path;  // JSON pointer
  std::string message;

  bool operator==(const Issue&) const = default;
};

struct ValidationReport {
  bool is_parseable = false;
  bool is_structurally_valid = false;
  std::vector<Issue> issues;
};

/// Version-lenient structural check: an "openapi" or "swagger" key at the
/// root, "paths" a mapping, each operation's "responses" a mapping, and
/// every "$ref" a string.
ValidationReport validate_structure(const ApiDocument& doc);

/// Sections under /components in document order.
struct ComponentIndex {
  std::vector<std::pair<std::string, std::vector<std::string>>> by_section;

  bool empty() const noexcept { return by_section.empty(); }
  const std::vector<std::string>* section(std::string_view name) const;
  bool operator==(const ComponentIndex&) const = default;
};

/// Component sections recognized by list_components.
const std::vector<std::string>& component_sections();

ComponentIndex list_components(const ApiDocument& doc);

/// Key of the marker mapping that replaces a reference back into its own
/// resolution chain: {"$ref-cycle": "#/components/schemas/Node"}.
inline constexpr std::string_view kCycleMarkerKey = "$ref-cycle";

struct RefResolution {
  ApiDocument document;
  /// External (non-"#") references that were left in place.
  std::vector<Issue> unresolved;
};

/// Inlines every local "$ref" with a copy of its target. References that
/// re-enter their own resolution chain become cycle markers. Throws
/// DanglingRef for missing local targets.
RefResolution resolve_refs_detailed(const ApiDocument& doc);
ApiDocument resolve_refs(const ApiDocument& doc);

/// Looks up a JSON pointer ("#/a/b" or "/a/b") in a tree. Handles ~0, ~1
/// and percent-encoding.
const DocNode* resolve_pointer(const NodePtr& root, std::string_view pointer);

}  // namespace oasfim
