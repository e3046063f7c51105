#include "oasfim/semantic_diff.hpp"

#include <algorithm>
#include <optional>
#include <sstream>
#include <unordered_map>

namespace oasfim {

std::string_view to_string(ChangeKind kind) {
  switch (kind) {
    case ChangeKind::added:
      return "added";
    case ChangeKind::removed:
      return "removed";
    case ChangeKind::modified:
      return "modified";
  }
  return "?";
}

std::string_view to_string(Significance significance) {
  return significance == Significance::significant ? "significant" : "insignificant";
}

std::string_view to_string(Verdict verdict) {
  switch (verdict) {
    case Verdict::identical:
      return "identical";
    case Verdict::insignificant_only:
      return "insignificant_only";
    case Verdict::different:
      return "different";
  }
  return "?";
}

std::size_t ChangeSet::count(Significance s) const {
  return static_cast<std::size_t>(
      std::count_if(changes.begin(), changes.end(), [s](const Change& c) { return c.significance == s; }));
}

std::string format_change(const Change& change) {
  std::string out(to_string(change.kind));
  out.push_back(' ');
  out += to_json_pointer(change.path);
  out.push_back(' ');
  out += to_string(change.significance);
  return out;
}

std::string format_changeset(const ChangeSet& changes) {
  std::string out;
  for (const auto& c : changes.changes) {
    out += format_change(c);
    out.push_back('\n');
  }
  return out;
}

// ---------------------------------------------------------------------------
// TypeShape

TypeShape structural_type(const DocNode& node) {
  TypeShape shape;
  shape.kind_ = node.kind();
  if (node.is_scalar()) {
    shape.scalar_type_ = node.scalar().type;
  } else if (node.is_mapping()) {
    shape.fields_.reserve(node.entries().size());
    for (const auto& [k, v] : node.entries()) shape.fields_.emplace_back(k, structural_type(*v));
    std::sort(shape.fields_.begin(), shape.fields_.end(),
              [](const auto& a, const auto& b) { return a.first < b.first; });
  } else {
    shape.elements_.reserve(node.items().size());
    for (const auto& v : node.items()) shape.elements_.push_back(structural_type(*v));
    std::sort(shape.elements_.begin(), shape.elements_.end());
    shape.elements_.erase(std::unique(shape.elements_.begin(), shape.elements_.end()), shape.elements_.end());
  }
  return shape;
}

int compare(const TypeShape& a, const TypeShape& b) {
  if (a.kind_ != b.kind_) return a.kind_ < b.kind_ ? -1 : 1;
  switch (a.kind_) {
    case NodeKind::scalar:
      if (a.scalar_type_ == b.scalar_type_) return 0;
      return a.scalar_type_ < b.scalar_type_ ? -1 : 1;
    case NodeKind::mapping: {
      auto n = std::min(a.fields_.size(), b.fields_.size());
      for (std::size_t i = 0; i < n; ++i) {
        if (int c = a.fields_[i].first.compare(b.fields_[i].first); c != 0) return c < 0 ? -1 : 1;
        if (int c = compare(a.fields_[i].second, b.fields_[i].second); c != 0) return c;
      }
      if (a.fields_.size() == b.fields_.size()) return 0;
      return a.fields_.size() < b.fields_.size() ? -1 : 1;
    }
    case NodeKind::sequence: {
      auto n = std::min(a.elements_.size(), b.elements_.size());
      for (std::size_t i = 0; i < n; ++i) {
        if (int c = compare(a.elements_[i], b.elements_[i]); c != 0) return c;
      }
      if (a.elements_.size() == b.elements_.size()) return 0;
      return a.elements_.size() < b.elements_.size() ? -1 : 1;
    }
  }
  return 0;
}

std::string TypeShape::to_string() const {
  std::string out;
  switch (kind_) {
    case NodeKind::scalar:
      out = oasfim::to_string(scalar_type_);
      break;
    case NodeKind::mapping: {
      out = "{";
      bool first = true;
      for (const auto& [k, v] : fields_) {
        if (!first) out += ", ";
        first = false;
        out += k + ": " + v.to_string();
      }
      out += "}";
      break;
    }
    case NodeKind::sequence: {
      out = "[";
      bool first = true;
      for (const auto& e : elements_) {
        if (!first) out += " | ";
        first = false;
        out += e.to_string();
      }
      out += "]";
      break;
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Classification

namespace {

bool is_example_key(std::string_view key) { return key == "example" || key == "examples"; }

// Keys directly below "properties" name schema properties, not keywords.
bool is_keyword_position(const NodePath& path, std::size_t i) {
  if (i == 0) return true;
  const auto* parent = std::get_if<std::string>(&path[i - 1]);
  return parent == nullptr || *parent != "properties";
}

}  // namespace

bool is_subjective_key(std::string_view key) {
  return key == "description" || key == "summary" || key == "title";
}

Significance classify_change(const Change& change) {
  const NodePath& path = change.path;
  std::optional<std::size_t> last_key;
  bool through_example = false;
  for (std::size_t i = 0; i < path.size(); ++i) {
    const auto* key = std::get_if<std::string>(&path[i]);
    if (key == nullptr) continue;
    last_key = i;
    if (!is_keyword_position(path, i)) continue;
    if (key->size() >= 2 && key->compare(0, 2, "x-") == 0) return Significance::insignificant;
    if (is_example_key(*key)) through_example = true;
  }
  if (last_key && is_keyword_position(path, *last_key) &&
      is_subjective_key(std::get<std::string>(path[*last_key]))) {
    return Significance::insignificant;
  }
  if (through_example && change.before && change.after &&
      structural_type(*change.before) == structural_type(*change.after)) {
    return Significance::insignificant;
  }
  return Significance::significant;
}

// ---------------------------------------------------------------------------
// Diff

namespace {

// (name, in) of a parameter-like object, if both are string scalars.
std::optional<std::string> parameter_key(const DocNode& n) {
  if (!n.is_mapping()) return std::nullopt;
  auto name = n.string_at("name");
  auto in = n.string_at("in");
  if (!name || !in) return std::nullopt;
  return *in + '\n' + *name;
}

// Returns keys for every item when all items are parameter-like and keys
// are unique within the sequence.
std::optional<std::vector<std::string>> parameter_keys(const DocNode& seq) {
  std::vector<std::string> keys;
  keys.reserve(seq.items().size());
  for (const auto& item : seq.items()) {
    auto k = parameter_key(*item);
    if (!k) return std::nullopt;
    keys.push_back(std::move(*k));
  }
  auto sorted = keys;
  std::sort(sorted.begin(), sorted.end());
  if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end()) return std::nullopt;
  return keys;
}

class Differ {
 public:
  std::vector<Change> run(const NodePtr& a, const NodePtr& b) {
    NodePath path;
    walk(a, b, path, false);
    return std::move(changes_);
  }

 private:
  void emit(NodePath path, ChangeKind kind, NodePtr before, NodePtr after) {
    Change c{std::move(path), kind, std::move(before), std::move(after), Significance::significant};
    c.significance = classify_change(c);
    changes_.push_back(std::move(c));
  }

  void walk(const NodePtr& a, const NodePtr& b, NodePath& path, bool in_example) {
    if (a->kind() != b->kind() || a->is_scalar()) {
      if (!(a->is_scalar() && b->is_scalar() && a->scalar() == b->scalar())) {
        emit(path, ChangeKind::modified, a, b);
      }
      return;
    }
    if (a->structural_hash() == b->structural_hash() && tree_equal(*a, *b)) return;
    if (a->is_mapping()) {
      walk_mapping(a, b, path, in_example);
    } else if (in_example) {
      emit(path, ChangeKind::modified, a, b);
    } else {
      walk_sequence(a, b, path);
    }
  }

  void walk_mapping(const NodePtr& a, const NodePtr& b, NodePath& path, bool in_example) {
    std::unordered_map<std::string_view, const NodePtr*> b_index;
    b_index.reserve(b->entries().size());
    for (const auto& [k, v] : b->entries()) b_index.emplace(k, &v);
    bool keyword_pos = path.empty() || !std::holds_alternative<std::string>(path.back()) ||
                       std::get<std::string>(path.back()) != "properties";
    for (const auto& [k, v] : a->entries()) {
      path.emplace_back(k);
      if (auto it = b_index.find(k); it != b_index.end()) {
        walk(v, *it->second, path, in_example || (keyword_pos && is_example_key(k)));
      } else {
        emit(path, ChangeKind::removed, v, nullptr);
      }
      path.pop_back();
    }
    for (const auto& [k, v] : b->entries()) {
      if (a->find(k) != nullptr) continue;
      path.emplace_back(k);
      emit(path, ChangeKind::added, nullptr, v);
      path.pop_back();
    }
  }

  void walk_sequence(const NodePtr& a, const NodePtr& b, NodePath& path) {
    const auto& ai = a->items();
    const auto& bi = b->items();
    auto a_keys = parameter_keys(*a);
    auto b_keys = a_keys ? parameter_keys(*b) : std::nullopt;
    if (a_keys && b_keys) {
      std::unordered_map<std::string_view, std::size_t> b_pos;
      for (std::size_t j = 0; j < b_keys->size(); ++j) b_pos.emplace((*b_keys)[j], j);
      std::vector<bool> matched(bi.size(), false);
      for (std::size_t i = 0; i < ai.size(); ++i) {
        path.emplace_back(i);
        if (auto it = b_pos.find((*a_keys)[i]); it != b_pos.end()) {
          matched[it->second] = true;
          walk(ai[i], bi[it->second], path, false);
        } else {
          emit(path, ChangeKind::removed, ai[i], nullptr);
        }
        path.pop_back();
      }
      for (std::size_t j = 0; j < bi.size(); ++j) {
        if (matched[j]) continue;
        path.emplace_back(j);
        emit(path, ChangeKind::added, nullptr, bi[j]);
        path.pop_back();
      }
      return;
    }
    auto common = std::min(ai.size(), bi.size());
    for (std::size_t i = 0; i < common; ++i) {
      path.emplace_back(i);
      walk(ai[i], bi[i], path, false);
      path.pop_back();
    }
    for (std::size_t i = common; i < ai.size(); ++i) {
      path.emplace_back(i);
      emit(path, ChangeKind::removed, ai[i], nullptr);
      path.pop_back();
    }
    for (std::size_t j = common; j < bi.size(); ++j) {
      path.emplace_back(j);
      emit(path, ChangeKind::added, nullptr, bi[j]);
      path.pop_back();
    }
  }

  std::vector<Change> changes_;
};

Verdict verdict_of(const std::vector<Change>& changes) {
  if (changes.empty()) return Verdict::identical;
  bool all_insignificant = std::all_of(changes.begin(), changes.end(), [](const Change& c) {
    return c.significance == Significance::insignificant;
  });
  return all_insignificant ? Verdict::insignificant_only : Verdict::different;
}

}  // namespace

ChangeSet diff_trees(const NodePtr& original, const NodePtr& candidate) {
  ChangeSet set;
  set.changes = Differ().run(original, candidate);
  set.verdict = verdict_of(set.changes);
  return set;
}

ChangeSet diff(const ApiDocument& original, const ApiDocument& candidate) {
  return diff_trees(original.root_ptr(), candidate.root_ptr());
}

bool is_semantically_identical(const ApiDocument& original, const ApiDocument& candidate) {
  return diff(original, candidate).verdict != Verdict::different;
}

}  // namespace oasfim
