#include "oasfim/document.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <iterator>
#include <regex>
#include <set>
#include <sstream>
#include <unordered_map>

#include <nlohmann/json.hpp>
#include <yaml-cpp/yaml.h>

#include "oasfim/error.hpp"

namespace oasfim {

std::string_view to_string(SourceFormat format) {
  return format == SourceFormat::json ? "json" : "yaml";
}

std::size_t count_lines(std::string_view text) {
  if (text.empty()) return 0;
  auto n = static_cast<std::size_t>(std::count(text.begin(), text.end(), '\n'));
  return text.back() == '\n' ? n : n + 1;
}

ApiDocument::ApiDocument(std::string raw_text, NodePtr root, SourceFormat format)
    : raw_text_(std::move(raw_text)), root_(std::move(root)), format_(format) {
  if (!root_) root_ = DocNode::make_scalar(Scalar::null());
  line_count_ = count_lines(raw_text_);
}

// ---------------------------------------------------------------------------
// YAML

namespace {

bool matches(const std::string& s, const std::regex& re) { return std::regex_match(s, re); }

// Resolution of plain scalars per the YAML 1.2 core schema.
Scalar resolve_plain(const std::string& s) {
  static const std::regex null_re("~|null|Null|NULL|");
  static const std::regex bool_re("true|True|TRUE|false|False|FALSE");
  static const std::regex int_re("[-+]?[0-9]+|0o[0-7]+|0x[0-9a-fA-F]+");
  static const std::regex float_re(
      "[-+]?(\\.[0-9]+|[0-9]+(\\.[0-9]*)?)([eE][-+]?[0-9]+)?|[-+]?\\.(inf|Inf|INF)|\\.(nan|NaN|NAN)");
  if (matches(s, null_re)) return Scalar::null();
  if (matches(s, bool_re)) return Scalar::boolean(s[0] == 't' || s[0] == 'T');
  if (matches(s, int_re) || matches(s, float_re)) return Scalar::number_from_literal(s);
  return Scalar::string(s);
}

Scalar resolve_tagged(const std::string& tag, const std::string& value, const YAML::Mark& mark) {
  static const std::string prefix = "tag:yaml.org,2002:";
  std::string t = tag.rfind(prefix, 0) == 0 ? tag.substr(prefix.size()) : tag;
  if (t == "str" || t == "binary" || t == "timestamp") return Scalar::string(value);
  Scalar plain = resolve_plain(value);
  if (t == "int" || t == "float") {
    if (plain.type != ScalarType::number) {
      throw ParseError("value '" + value + "' is not a valid !!" + t, mark.line + 1, mark.column + 1);
    }
    return plain;
  }
  if (t == "bool" && plain.type != ScalarType::boolean) {
    throw ParseError("value '" + value + "' is not a valid !!bool", mark.line + 1, mark.column + 1);
  }
  if (t == "null") return Scalar::null();
  // Unknown local tags keep the plain resolution.
  return plain;
}

class YamlConverter {
 public:
  NodePtr convert(const YAML::Node& node) {
    switch (node.Type()) {
      case YAML::NodeType::Undefined:
      case YAML::NodeType::Null:
        return DocNode::make_scalar(Scalar::null());
      case YAML::NodeType::Scalar:
        return DocNode::make_scalar(scalar_of(node));
      case YAML::NodeType::Sequence: {
        std::vector<NodePtr> items;
        items.reserve(node.size());
        for (const auto& item : node) items.push_back(convert(item));
        return DocNode::make_sequence(std::move(items));
      }
      case YAML::NodeType::Map:
        return convert_map(node);
    }
    return DocNode::make_scalar(Scalar::null());
  }

 private:
  static Scalar scalar_of(const YAML::Node& node) {
    const std::string& tag = node.Tag();
    const std::string& value = node.Scalar();
    if (tag == "!") return Scalar::string(value);  // quoted or block scalar
    if (tag == "?" || tag.empty()) return resolve_plain(value);
    return resolve_tagged(tag, value, node.Mark());
  }

  static std::string key_of(const YAML::Node& key) {
    if (!key.IsScalar()) {
      if (key.IsNull()) return "null";
      throw ParseError("mapping keys must be scalars", key.Mark().line + 1, key.Mark().column + 1);
    }
    return key.Scalar();
  }

  NodePtr convert_map(const YAML::Node& node) {
    std::vector<MappingEntry> entries;
    std::unordered_map<std::string, std::size_t> seen;
    std::vector<YAML::Node> merges;
    for (const auto& kv : node) {
      if (kv.first.IsScalar() && kv.first.Tag() == "?" && kv.first.Scalar() == "<<") {
        merges.push_back(kv.second);
        continue;
      }
      std::string key = key_of(kv.first);
      if (seen.count(key)) {
        throw ParseError("duplicate mapping key '" + key + "'", kv.first.Mark().line + 1,
                         kv.first.Mark().column + 1);
      }
      seen.emplace(key, entries.size());
      entries.emplace_back(std::move(key), convert(kv.second));
    }
    // Merge keys: explicit keys win, then earlier merge sources.
    for (const auto& m : merges) {
      std::vector<YAML::Node> sources;
      if (m.IsMap()) {
        sources.push_back(m);
      } else if (m.IsSequence()) {
        for (const auto& s : m) sources.push_back(s);
      } else {
        throw ParseError("merge key value must be a mapping", m.Mark().line + 1, m.Mark().column + 1);
      }
      for (const auto& src : sources) {
        if (!src.IsMap()) {
          throw ParseError("merge key value must be a mapping", src.Mark().line + 1,
                           src.Mark().column + 1);
        }
        NodePtr merged = convert_map(src);
        for (const auto& [k, v] : merged->entries()) {
          if (seen.count(k)) continue;
          seen.emplace(k, entries.size());
          entries.emplace_back(k, v);
        }
      }
    }
    return DocNode::make_mapping(std::move(entries));
  }
};

NodePtr parse_yaml(const std::string& text) {
  YAML::Node node;
  try {
    node = YAML::Load(text);
  } catch (const YAML::Exception& e) {
    throw ParseError(e.msg, static_cast<std::size_t>(e.mark.line) + 1,
                     static_cast<std::size_t>(e.mark.column) + 1);
  }
  return YamlConverter().convert(node);
}

// ---------------------------------------------------------------------------
// JSON

NodePtr from_json(const nlohmann::ordered_json& j) {
  using nlohmann::ordered_json;
  switch (j.type()) {
    case ordered_json::value_t::object: {
      std::vector<MappingEntry> entries;
      entries.reserve(j.size());
      for (auto it = j.begin(); it != j.end(); ++it) entries.emplace_back(it.key(), from_json(it.value()));
      return DocNode::make_mapping(std::move(entries));
    }
    case ordered_json::value_t::array: {
      std::vector<NodePtr> items;
      items.reserve(j.size());
      for (const auto& v : j) items.push_back(from_json(v));
      return DocNode::make_sequence(std::move(items));
    }
    case ordered_json::value_t::string:
      return DocNode::make_scalar(Scalar::string(j.get<std::string>()));
    case ordered_json::value_t::boolean:
      return DocNode::make_scalar(Scalar::boolean(j.get<bool>()));
    case ordered_json::value_t::number_integer:
      return DocNode::make_scalar(Scalar::number_from_int(j.get<std::int64_t>()));
    case ordered_json::value_t::number_unsigned:
      return DocNode::make_scalar(Scalar::number_from_literal(std::to_string(j.get<std::uint64_t>())));
    case ordered_json::value_t::number_float:
      return DocNode::make_scalar(Scalar::number_from_literal(j.dump()));
    default:
      return DocNode::make_scalar(Scalar::null());
  }
}

// Rejects duplicate keys, which nlohmann would otherwise silently overwrite.
class DuplicateKeyCheck {
 public:

  bool operator()(int depth, nlohmann::ordered_json::parse_event_t event, nlohmann::ordered_json& parsed) {
    using E = nlohmann::ordered_json::parse_event_t;
    (void)depth;
    if (event == E::object_start) {
      keys_.emplace_back();
    } else if (event == E::object_end) {
      if (!keys_.empty()) keys_.pop_back();
    } else if (event == E::key) {
      auto k = parsed.get<std::string>();
      if (!keys_.empty() && !keys_.back().insert(k).second) duplicate_ = k;
    }
    return true;
  }

  const std::optional<std::string>& duplicate() const { return duplicate_; }

 private:
  std::vector<std::set<std::string>> keys_;
  std::optional<std::string> duplicate_;
};

std::pair<std::size_t, std::size_t> line_col_of(const std::string& text, std::size_t byte_pos) {
  std::size_t line = 1;
  std::size_t col = 1;
  byte_pos = std::min(byte_pos, text.size());
  for (std::size_t i = 0; i < byte_pos; ++i) {
    if (text[i] == '\n') {
      ++line;
      col = 1;
    } else {
      ++col;
    }
  }
  return {line, col};
}

NodePtr parse_json(const std::string& text) {
  DuplicateKeyCheck check;
  nlohmann::ordered_json j;
  try {
    j = nlohmann::ordered_json::parse(text, std::ref(check));
  } catch (const nlohmann::json::parse_error& e) {
    // byte is 1-based and points at the offending character.
    auto [line, col] = line_col_of(text, e.byte > 0 ? e.byte - 1 : 0);
    std::string msg = e.what();
    if (auto p = msg.find("syntax error"); p != std::string::npos) msg = msg.substr(p);
    throw ParseError(msg, line, col);
  }
  if (check.duplicate()) throw ParseError("duplicate object key '" + *check.duplicate() + "'", 1, 1);
  return from_json(j);
}

}  // namespace

ApiDocument parse_definition(std::string text, std::optional<SourceFormat> format_hint) {
  SourceFormat format = SourceFormat::yaml;
  if (format_hint) {
    format = *format_hint;
  } else {
    auto first = text.find_first_not_of(" \t\r\n\xEF\xBB\xBF");
    if (first != std::string::npos && text[first] == '{') format = SourceFormat::json;
  }
  NodePtr root = format == SourceFormat::json ? parse_json(text) : parse_yaml(text);
  return ApiDocument(std::move(text), std::move(root), format);
}

ApiDocument load_definition(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  std::optional<SourceFormat> hint;
  auto ext = path.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  if (ext == ".json") hint = SourceFormat::json;
  if (ext == ".yaml" || ext == ".yml") hint = SourceFormat::yaml;
  return parse_definition(std::move(text), hint);
}

// ---------------------------------------------------------------------------
// Serialization

namespace {

void append_quoted(std::string& out, std::string_view s) {
  out.push_back('"');
  for (unsigned char c : s) {
    switch (c) {
      case '"':
        out += "\\\"";
        break;
      case '\\':
        out += "\\\\";
        break;
      case '\n':
        out += "\\n";
        break;
      case '\t':
        out += "\\t";
        break;
      case '\r':
        out += "\\r";
        break;
      default:
        if (c < 0x20 || c == 0x7F) {
          static constexpr char kHex[] = "0123456789abcdef";
          out += "\\u00";
          out.push_back(kHex[c >> 4]);
          out.push_back(kHex[c & 0xF]);
        } else {
          out.push_back(static_cast<char>(c));
        }
    }
  }
  out.push_back('"');
}

std::string number_text(const Scalar& s, SourceFormat format) {
  if (std::isnan(s.number)) return format == SourceFormat::json ? "null" : ".nan";
  if (std::isinf(s.number)) {
    if (format == SourceFormat::json) return "null";
    return s.number > 0 ? ".inf" : "-.inf";
  }
  const std::string& t = s.text;
  bool plain_decimal = !t.empty() && t.find_first_not_of("+-0123456789.eE") == std::string::npos &&
                       t[0] != '+' && t[0] != '.' && t.find("x") == std::string::npos;
  if (plain_decimal && t.back() != '.' && t.find(".e") == std::string::npos &&
      t.find(".E") == std::string::npos) {
    return t;
  }
  return Scalar::number_from_double(s.number).text;
}

void append_scalar(std::string& out, const Scalar& s, SourceFormat format) {
  switch (s.type) {
    case ScalarType::string:
      append_quoted(out, s.text);
      break;
    case ScalarType::number:
      out += number_text(s, format);
      break;
    case ScalarType::boolean:
    case ScalarType::null:
      out += s.text;
      break;
  }
}

void emit_json(std::string& out, const DocNode& n, int indent) {
  std::string pad(static_cast<std::size_t>(indent + 2), ' ');
  std::string close_pad(static_cast<std::size_t>(indent), ' ');
  if (n.is_scalar()) {
    append_scalar(out, n.scalar(), SourceFormat::json);
  } else if (n.is_mapping()) {
    if (n.entries().empty()) {
      out += "{}";
      return;
    }
    out += "{\n";
    bool first = true;
    for (const auto& [k, v] : n.entries()) {
      if (!first) out += ",\n";
      first = false;
      out += pad;
      append_quoted(out, k);
      out += ": ";
      emit_json(out, *v, indent + 2);
    }
    out += "\n" + close_pad + "}";
  } else {
    if (n.items().empty()) {
      out += "[]";
      return;
    }
    out += "[\n";
    bool first = true;
    for (const auto& v : n.items()) {
      if (!first) out += ",\n";
      first = false;
      out += pad;
      emit_json(out, *v, indent + 2);
    }
    out += "\n" + close_pad + "]";
  }
}

void emit_yaml_value(std::string& out, const DocNode& n, int indent);

void emit_yaml_block(std::string& out, const DocNode& n, int indent) {
  std::string pad(static_cast<std::size_t>(indent), ' ');
  if (n.is_mapping()) {
    for (const auto& [k, v] : n.entries()) {
      out += pad;
      append_quoted(out, k);
      out += ":";
      emit_yaml_value(out, *v, indent + 2);
    }
  } else {
    for (const auto& v : n.items()) {
      out += pad;
      out += "-";
      emit_yaml_value(out, *v, indent + 2);
    }
  }
}

// Emits whatever follows "key:" or "-", including the trailing newline.
void emit_yaml_value(std::string& out, const DocNode& n, int indent) {
  if (n.is_scalar()) {
    out.push_back(' ');
    append_scalar(out, n.scalar(), SourceFormat::yaml);
    out.push_back('\n');
  } else if (n.size() == 0) {
    out += n.is_mapping() ? " {}\n" : " []\n";
  } else {
    out.push_back('\n');
    emit_yaml_block(out, n, indent);
  }
}

}  // namespace

std::string serialize(const DocNode& root, SourceFormat format) {
  std::string out;
  if (format == SourceFormat::json) {
    emit_json(out, root, 0);
    out.push_back('\n');
    return out;
  }
  if (root.is_scalar()) {
    append_scalar(out, root.scalar(), SourceFormat::yaml);
    out.push_back('\n');
  } else if (root.size() == 0) {
    out += root.is_mapping() ? "{}\n" : "[]\n";
  } else {
    emit_yaml_block(out, root, 0);
  }
  return out;
}

std::string serialize(const ApiDocument& doc) { return serialize(doc.root(), doc.source_format()); }

std::string serialize(const ApiDocument& doc, SourceFormat format) { return serialize(doc.root(), format); }

// ---------------------------------------------------------------------------
// Structural validation

namespace {

const std::set<std::string, std::less<>>& http_methods() {
  static const std::set<std::string, std::less<>> methods = {"get",  "put",   "post",  "delete",
                                                             "options", "head", "patch", "trace"};
  return methods;
}

void check_refs(const DocNode& n, NodePath& path, std::vector<Issue>& issues) {
  if (n.is_mapping()) {
    for (const auto& [k, v] : n.entries()) {
      path.emplace_back(k);
      if (k == "$ref" && !(v->is_scalar() && v->scalar().type == ScalarType::string)) {
        issues.push_back({to_json_pointer(path), "$ref must be a string"});
      }
      check_refs(*v, path, issues);
      path.pop_back();
    }
  } else if (n.is_sequence()) {
    for (std::size_t i = 0; i < n.items().size(); ++i) {
      path.emplace_back(i);
      check_refs(*n.items()[i], path, issues);
      path.pop_back();
    }
  }
}

}  // namespace

ValidationReport validate_structure(const ApiDocument& doc) {
  ValidationReport report;
  report.is_parseable = true;
  const DocNode& root = doc.root();
  if (!root.is_mapping()) {
    report.issues.push_back({"/", "document root must be a mapping"});
  } else {
    if (root.find("openapi") == nullptr && root.find("swagger") == nullptr) {
      report.issues.push_back({"/", "missing 'openapi' or 'swagger' key"});
    }
    if (const DocNode* paths = root.find("paths")) {
      if (!paths->is_mapping()) {
        report.issues.push_back({"/paths", "'paths' must be a mapping"});
      } else {
        for (const auto& [path_key, item] : paths->entries()) {
          if (!item->is_mapping()) continue;
          for (const auto& [method, op] : item->entries()) {
            if (!http_methods().count(method) || !op->is_mapping()) continue;
            const DocNode* responses = op->find("responses");
            if (responses != nullptr && !responses->is_mapping()) {
              report.issues.push_back({to_json_pointer({std::string("paths"), path_key, method,
                                                        std::string("responses")}),
                                       "'responses' must be a mapping"});
            }
          }
        }
      }
    }
  }
  NodePath path;
  check_refs(root, path, report.issues);
  report.is_structurally_valid = report.issues.empty();
  return report;
}

// ---------------------------------------------------------------------------
// Components

const std::vector<std::string>& component_sections() {
  static const std::vector<std::string> sections = {"schemas",       "responses", "parameters",
                                                    "requestBodies", "headers",   "securitySchemes",
                                                    "examples",      "links",     "callbacks"};
  return sections;
}

const std::vector<std::string>* ComponentIndex::section(std::string_view name) const {
  for (const auto& [s, names] : by_section) {
    if (s == name) return &names;
  }
  return nullptr;
}

ComponentIndex list_components(const ApiDocument& doc) {
  ComponentIndex index;
  if (!doc.root().is_mapping()) return index;
  const DocNode* components = doc.root().find("components");
  if (components == nullptr || !components->is_mapping()) return index;
  const auto& known = component_sections();
  for (const auto& [section, body] : components->entries()) {
    if (std::find(known.begin(), known.end(), section) == known.end()) continue;
    if (!body->is_mapping()) continue;
    std::vector<std::string> names;
    names.reserve(body->entries().size());
    for (const auto& [name, _] : body->entries()) names.push_back(name);
    index.by_section.emplace_back(section, std::move(names));
  }
  return index;
}

// ---------------------------------------------------------------------------
// Reference resolution

namespace {

int hex_value(char c) {
  if (c >= '0' && c <= '9') return c - '0';
  if (c >= 'a' && c <= 'f') return c - 'a' + 10;
  if (c >= 'A' && c <= 'F') return c - 'A' + 10;
  return -1;
}

std::string percent_decode(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] == '%' && i + 2 < s.size()) {
      int hi = hex_value(s[i + 1]);
      int lo = hex_value(s[i + 2]);
      if (hi >= 0 && lo >= 0) {
        out.push_back(static_cast<char>(hi * 16 + lo));
        i += 2;
        continue;
      }
    }
    out.push_back(s[i]);
  }
  return out;
}

std::string unescape_token(std::string_view token) {
  std::string out;
  for (std::size_t i = 0; i < token.size(); ++i) {
    if (token[i] == '~' && i + 1 < token.size()) {
      if (token[i + 1] == '0') {
        out.push_back('~');
        ++i;
        continue;
      }
      if (token[i + 1] == '1') {
        out.push_back('/');
        ++i;
        continue;
      }
    }
    out.push_back(token[i]);
  }
  return out;
}

NodePtr lookup_pointer(const NodePtr& root, std::string_view pointer) {
  if (!pointer.empty() && pointer[0] == '#') pointer.remove_prefix(1);
  std::string decoded = percent_decode(pointer);
  if (decoded.empty()) return root;
  if (decoded[0] != '/') return nullptr;
  std::string_view rest(decoded);
  rest.remove_prefix(1);
  NodePtr cur = root;
  while (true) {
    auto slash = rest.find('/');
    std::string token = unescape_token(rest.substr(0, slash));
    if (cur->is_mapping()) {
      cur = cur->find_ptr(token);
    } else if (cur->is_sequence()) {
      if (token.empty() || token.find_first_not_of("0123456789") != std::string::npos) return nullptr;
      auto idx = std::stoul(token);
      cur = idx < cur->items().size() ? cur->items()[idx] : nullptr;
    } else {
      cur = nullptr;
    }
    if (!cur) return nullptr;
    if (slash == std::string_view::npos) return cur;
    rest.remove_prefix(slash + 1);
  }
}

class RefResolver {
 public:
  explicit RefResolver(NodePtr root) : root_(std::move(root)) {}

  NodePtr resolve(const NodePtr& node, NodePath& path) {
    if (node->is_scalar()) return node;
    if (node->is_sequence()) {
      std::vector<NodePtr> items;
      items.reserve(node->items().size());
      bool changed = false;
      for (std::size_t i = 0; i < node->items().size(); ++i) {
        path.emplace_back(i);
        items.push_back(resolve(node->items()[i], path));
        path.pop_back();
        changed = changed || items.back() != node->items()[i];
      }
      return changed ? DocNode::make_sequence(std::move(items)) : node;
    }
    if (const DocNode* ref = node->find("$ref"); ref != nullptr && ref->is_scalar() &&
                                                  ref->scalar().type == ScalarType::string) {
      return resolve_ref(node, ref->scalar().text, path);
    }
    std::vector<MappingEntry> entries;
    entries.reserve(node->entries().size());
    bool changed = false;
    for (const auto& [k, v] : node->entries()) {
      path.emplace_back(k);
      entries.emplace_back(k, resolve(v, path));
      path.pop_back();
      changed = changed || entries.back().second != v;
    }
    return changed ? DocNode::make_mapping(std::move(entries)) : node;
  }

  std::vector<Issue> take_unresolved() { return std::move(unresolved_); }

 private:
  NodePtr resolve_ref(const NodePtr& node, const std::string& ref, NodePath& path) {
    if (ref.empty() || ref[0] != '#') {
      unresolved_.push_back({to_json_pointer(path), "external reference left unresolved: " + ref});
      return node;
    }
    if (std::find(stack_.begin(), stack_.end(), ref) != stack_.end()) {
      ++cycles_hit_;
      return DocNode::make_mapping({{std::string(kCycleMarkerKey), DocNode::string(ref)}});
    }
    if (auto it = memo_.find(ref); it != memo_.end()) return it->second;
    NodePtr target_ptr = lookup_pointer(root_, ref);
    if (!target_ptr) throw DanglingRef(ref, to_json_pointer(path));
    stack_.push_back(ref);
    auto cycles_before = cycles_hit_;
    NodePath target_path;
    NodePtr resolved = resolve(target_ptr, target_path);
    stack_.pop_back();
    // Only cycle-free expansions are independent of the entry point.
    if (cycles_hit_ == cycles_before) memo_.emplace(ref, resolved);
    return resolved;
  }

  NodePtr root_;
  std::vector<std::string> stack_;
  std::unordered_map<std::string, NodePtr> memo_;
  std::vector<Issue> unresolved_;
  std::size_t cycles_hit_ = 0;
};

}  // namespace

const DocNode* resolve_pointer(const NodePtr& root, std::string_view pointer) {
  return lookup_pointer(root, pointer).get();
}

RefResolution resolve_refs_detailed(const ApiDocument& doc) {
  RefResolver resolver(doc.root_ptr());
  NodePath path;
  NodePtr root = resolver.resolve(doc.root_ptr(), path);
  return {ApiDocument(doc.raw_text(), std::move(root), doc.source_format()), resolver.take_unresolved()};
}

ApiDocument resolve_refs(const ApiDocument& doc) { return resolve_refs_detailed(doc).document; }

}  // namespace oasfim
