#include <gtest/gtest.h>

#include <algorithm>
#include <set>
#include <tuple>

#include "oasfim/document.hpp"
#include "oasfim/semantic_diff.hpp"
#include "test_support.hpp"

namespace oasfim {
namespace {

// --- naive reference implementation -------------------------------------

using Row = std::tuple<std::string, std::string, std::string>;  // pointer, kind, significance

bool naive_equal(const DocNode& a, const DocNode& b) {
  if (a.kind() != b.kind()) return false;
  if (a.is_scalar()) return a.scalar() == b.scalar();
  if (a.is_sequence()) {
    if (a.items().size() != b.items().size()) return false;
    for (std::size_t i = 0; i < a.items().size(); ++i) {
      if (!naive_equal(*a.items()[i], *b.items()[i])) return false;
    }
    return true;
  }
  if (a.entries().size() != b.entries().size()) return false;
  for (const auto& [k, v] : a.entries()) {
    const DocNode* w = b.find(k);
    if (w == nullptr || !naive_equal(*v, *w)) return false;
  }
  return true;
}

// Shape as a string: scalars by tag, mappings by sorted keys, sequences by
// the sorted set of element shapes.
std::string naive_shape(const DocNode& n) {
  if (n.is_scalar()) return std::string(to_string(n.scalar().type));
  if (n.is_mapping()) {
    std::vector<std::string> parts;
    for (const auto& [k, v] : n.entries()) parts.push_back(k + ":" + naive_shape(*v));
    std::sort(parts.begin(), parts.end());
    std::string out = "{";
    for (const auto& p : parts) out += p + ",";
    return out + "}";
  }
  std::set<std::string> parts;
  for (const auto& v : n.items()) parts.insert(naive_shape(*v));
  std::string out = "[";
  for (const auto& p : parts) out += p + "|";
  return out + "]";
}

struct NaiveDiff {
  std::vector<Row> rows;

  static bool keyword_at(const NodePath& path, std::size_t i) {
    return i == 0 || !std::holds_alternative<std::string>(path[i - 1]) ||
           std::get<std::string>(path[i - 1]) != "properties";
  }

  static std::string significance(const NodePath& path, const DocNode* before, const DocNode* after) {
    bool example = false;
    std::string last;
    bool last_keyword = false;
    for (std::size_t i = 0; i < path.size(); ++i) {
      if (!std::holds_alternative<std::string>(path[i])) continue;
      const auto& k = std::get<std::string>(path[i]);
      last = k;
      last_keyword = keyword_at(path, i);
      if (!last_keyword) continue;
      if (k.rfind("x-", 0) == 0) return "insignificant";
      if (k == "example" || k == "examples") example = true;
    }
    if (last_keyword && (last == "description" || last == "summary" || last == "title")) return "insignificant";
    if (example && before && after && naive_shape(*before) == naive_shape(*after)) return "insignificant";
    return "significant";
  }

  void emit(const NodePath& path, const char* kind, const DocNode* before, const DocNode* after) {
    rows.emplace_back(to_json_pointer(path), kind, significance(path, before, after));
  }

  static std::optional<std::vector<std::string>> param_keys(const DocNode& seq) {
    std::vector<std::string> keys;
    for (const auto& item : seq.items()) {
      if (!item->is_mapping()) return std::nullopt;
      auto name = item->string_at("name");
      auto in = item->string_at("in");
      if (!name || !in) return std::nullopt;
      keys.push_back(*in + "|" + *name);
    }
    if (std::set<std::string>(keys.begin(), keys.end()).size() != keys.size()) return std::nullopt;
    return keys;
  }

  void walk(const DocNode& a, const DocNode& b, NodePath path, bool in_example) {
    if (naive_equal(a, b)) return;
    if (a.kind() != b.kind() || a.is_scalar()) {
      emit(path, "modified", &a, &b);
      return;
    }
    if (a.is_mapping()) {
      for (const auto& [k, v] : a.entries()) {
        auto p = path;
        p.emplace_back(k);
        bool ex = in_example || (keyword_at(p, p.size() - 1) && (k == "example" || k == "examples"));
        if (const DocNode* w = b.find(k)) {
          walk(*v, *w, p, ex);
        } else {
          emit(p, "removed", v.get(), nullptr);
        }
      }
      for (const auto& [k, v] : b.entries()) {
        if (a.find(k) != nullptr) continue;
        auto p = path;
        p.emplace_back(k);
        emit(p, "added", nullptr, v.get());
      }
      return;
    }
    if (in_example) {
      emit(path, "modified", &a, &b);
      return;
    }
    auto ka = param_keys(a);
    auto kb = param_keys(b);
    if (ka && kb) {
      for (std::size_t i = 0; i < ka->size(); ++i) {
        auto p = path;
        p.emplace_back(i);
        auto it = std::find(kb->begin(), kb->end(), (*ka)[i]);
        if (it == kb->end()) {
          emit(p, "removed", a.items()[i].get(), nullptr);
        } else {
          walk(*a.items()[i], *b.items()[static_cast<std::size_t>(it - kb->begin())], p, false);
        }
      }
      for (std::size_t j = 0; j < kb->size(); ++j) {
        if (std::find(ka->begin(), ka->end(), (*kb)[j]) != ka->end()) continue;
        auto p = path;
        p.emplace_back(j);
        emit(p, "added", nullptr, b.items()[j].get());
      }
      return;
    }
    const auto& ai = a.items();
    const auto& bi = b.items();
    for (std::size_t i = 0; i < std::max(ai.size(), bi.size()); ++i) {
      auto p = path;
      p.emplace_back(i);
      if (i < ai.size() && i < bi.size()) {
        walk(*ai[i], *bi[i], p, false);
      } else if (i < ai.size()) {
        emit(p, "removed", ai[i].get(), nullptr);
      } else {
        emit(p, "added", nullptr, bi[i].get());
      }
    }
  }
};

std::vector<Row> rows_of(const ChangeSet& cs) {
  std::vector<Row> rows;
  for (const auto& c : cs.changes) {
    rows.emplace_back(to_json_pointer(c.path), std::string(to_string(c.kind)), std::string(to_string(c.significance)));
  }
  std::sort(rows.begin(), rows.end());
  return rows;
}

// Small perturbation of a tree: replace, drop or add at a random spot.
NodePtr mutate(const NodePtr& n, DeterministicRng& rng) {
  if (n->is_scalar() || rng.below(4) == 0) {
    return rng.bernoulli(0.5) ? testing::random_scalar(rng) : testing::random_tree(rng, 4);
  }
  if (n->is_mapping()) {
    auto entries = n->entries();
    if (entries.empty() || rng.below(5) == 0) {
      std::string key = rng.bernoulli(0.5) ? "description" : "added";
      if (n->find(key) == nullptr) entries.emplace_back(key, testing::random_scalar(rng));
    } else {
      auto i = rng.below(entries.size());
      if (rng.below(4) == 0) {
        entries.erase(entries.begin() + static_cast<std::ptrdiff_t>(i));
      } else {
        entries[i].second = mutate(entries[i].second, rng);
      }
    }
    // Reordering never matters.
    rng.shuffle(entries.begin(), entries.end());
    return DocNode::make_mapping(std::move(entries));
  }
  auto items = n->items();
  if (items.empty() || rng.below(5) == 0) {
    items.push_back(testing::random_scalar(rng));
  } else {
    auto i = rng.below(items.size());
    items[i] = mutate(items[i], rng);
  }
  return DocNode::make_sequence(std::move(items));
}

int rank(Verdict v) { return v == Verdict::identical ? 0 : v == Verdict::insignificant_only ? 1 : 2; }

// --- worked examples ------------------------------------------------------

const char* kDoc =
    "openapi: 3.0.0\n"
    "info:\n  title: Pets\n  version: '1'\n"
    "paths:\n"
    "  /pets:\n"
    "    get:\n"
    "      description: List all pets\n"
    "      parameters:\n"
    "        - {name: limit, in: query, schema: {type: integer}}\n"
    "        - {name: kind, in: query, schema: {type: string}}\n"
    "      responses:\n"
    "        '200':\n"
    "          description: OK\n"
    "          content:\n"
    "            application/json:\n"
    "              example: {count: 5, names: [a, b]}\n"
    "        '404':\n"
    "          description: Not found\n";

ChangeSet diff_text(const std::string& a, const std::string& b) {
  return diff(parse_definition(a), parse_definition(b));
}

std::string replace(std::string s, const std::string& from, const std::string& to) {
  auto p = s.find(from);
  EXPECT_NE(p, std::string::npos) << from;
  s.replace(p, from.size(), to);
  return s;
}

TEST(Diff, IdenticalDocuments) {
  auto cs = diff_text(kDoc, kDoc);
  EXPECT_EQ(cs.verdict, Verdict::identical);
  EXPECT_TRUE(cs.changes.empty());
}

TEST(Diff, SwappedTopLevelKeysAreIdentical) {
  std::string swapped =
      "paths:\n" + std::string(kDoc).substr(std::string(kDoc).find("  /pets:")) +
      "openapi: 3.0.0\ninfo:\n  version: '1'\n  title: Pets\n";
  EXPECT_EQ(diff_text(kDoc, swapped).verdict, Verdict::identical);
}

TEST(Diff, RewordedDescriptionIsInsignificant) {
  auto cs = diff_text(kDoc, replace(kDoc, "List all pets", "Returns every pet"));
  EXPECT_EQ(cs.verdict, Verdict::insignificant_only);
  ASSERT_EQ(cs.changes.size(), 1u);
  EXPECT_EQ(format_change(cs.changes[0]), "modified /paths/~1pets/get/description insignificant");
}

TEST(Diff, TitleChangeIsSemanticallyIdentical) {
  EXPECT_TRUE(is_semantically_identical(parse_definition(kDoc), parse_definition(replace(kDoc, "title: Pets", "title: Animals"))));
}

TEST(Diff, RemovedResponseIsDifferent) {
  auto b = replace(kDoc, "        '404':\n          description: Not found\n", "");
  auto cs = diff_text(kDoc, b);
  EXPECT_EQ(cs.verdict, Verdict::different);
  ASSERT_EQ(cs.changes.size(), 1u);
  EXPECT_EQ(format_change(cs.changes[0]), "removed /paths/~1pets/get/responses/404 significant");
  EXPECT_FALSE(is_semantically_identical(parse_definition(kDoc), parse_definition(b)));
}

TEST(Diff, ExampleValueKeepingTypeIsInsignificant) {
  auto cs = diff_text(kDoc, replace(kDoc, "count: 5", "count: 7"));
  EXPECT_EQ(cs.verdict, Verdict::insignificant_only);
  auto seq = diff_text(kDoc, replace(kDoc, "names: [a, b]", "names: [x]"));
  EXPECT_EQ(seq.verdict, Verdict::insignificant_only);
}

TEST(Diff, ExampleValueChangingTypeIsSignificant) {
  auto cs = diff_text(kDoc, replace(kDoc, "count: 5", "count: five"));
  EXPECT_EQ(cs.verdict, Verdict::different);
}

TEST(Diff, ParametersMatchByNameAndLocation) {
  auto reordered = replace(kDoc,
                           "        - {name: limit, in: query, schema: {type: integer}}\n"
                           "        - {name: kind, in: query, schema: {type: string}}\n",
                           "        - {name: kind, in: query, schema: {type: string}}\n"
                           "        - {name: limit, in: query, schema: {type: integer}}\n");
  EXPECT_EQ(diff_text(kDoc, reordered).verdict, Verdict::identical);
  auto retyped = replace(kDoc, "{name: kind, in: query, schema: {type: string}}", "{name: kind, in: query, schema: {type: number}}");
  auto cs = diff_text(kDoc, retyped);
  ASSERT_EQ(cs.changes.size(), 1u);
  EXPECT_EQ(format_change(cs.changes[0]), "modified /paths/~1pets/get/parameters/1/schema/type significant");
}

TEST(Diff, QuotingAndFormatDoNotMatter) {
  auto json = serialize(parse_definition(kDoc), SourceFormat::json);
  EXPECT_EQ(diff(parse_definition(kDoc), parse_definition(json)).verdict, Verdict::identical);
  EXPECT_EQ(diff_text("openapi: '3.0.0'\na: \"x\"\n", "openapi: \"3.0.0\"\na: x\n").verdict, Verdict::identical);
}

TEST(Diff, ScalarTypeChangeIsSignificant) {
  EXPECT_EQ(diff_text("openapi: 3.0.0\nv: 5\n", "openapi: 3.0.0\nv: '5'\n").verdict, Verdict::different);
}

TEST(Diff, VendorExtensionsAreInsignificant) {
  EXPECT_EQ(diff_text("openapi: 3.0.0\nx-a: {b: 1}\n", "openapi: 3.0.0\nx-a: {b: 2, c: [1]}\n").verdict,
            Verdict::insignificant_only);
}

TEST(Diff, PropertyNamedDescriptionIsSignificant) {
  auto a = "openapi: 3.0.0\nS:\n  properties:\n    description: {type: string}\n";
  auto b = "openapi: 3.0.0\nS:\n  properties:\n    description: {type: integer}\n";
  EXPECT_EQ(diff_text(a, b).verdict, Verdict::different);
  auto c = "openapi: 3.0.0\nS:\n  properties: {}\n";
  EXPECT_EQ(diff_text(a, c).verdict, Verdict::different);
}

TEST(Classify, Basics) {
  auto five = DocNode::make_scalar(Scalar::number_from_int(5));
  auto seven = DocNode::make_scalar(Scalar::number_from_int(7));
  auto word = DocNode::string("five");
  Change desc{{std::string("info"), std::string("description")}, ChangeKind::modified, word, word};
  EXPECT_EQ(classify_change(desc), Significance::insignificant);
  NodePath ex{std::string("components"), std::string("examples"), std::string("E"), std::string("value")};
  EXPECT_EQ(classify_change({ex, ChangeKind::modified, five, seven}), Significance::insignificant);
  EXPECT_EQ(classify_change({ex, ChangeKind::modified, five, word}), Significance::significant);
  EXPECT_EQ(classify_change({ex, ChangeKind::removed, five, nullptr}), Significance::significant);
}

TEST(StructuralType, Basics) {
  auto shape = [](const char* yaml) { return structural_type(*parse_definition(std::string("v: ") + yaml + "\n").root().find("v")); };
  EXPECT_EQ(shape("{a: 1, b: x}").to_string(), "{a: number, b: string}");
  EXPECT_EQ(shape("[1, 2, 3]"), shape("[9]"));
  EXPECT_NE(shape("{a: 1}"), shape("{a: 1, b: 2}"));
  EXPECT_NE(shape("[1]"), shape("[1, x]"));
  EXPECT_NE(shape("[]"), shape("[1]"));
}

// Every sequence of up to three small values: equal shapes exactly when the
// sets of element type tags agree.
TEST(StructuralType, BruteForceSequencesOfScalars) {
  std::vector<NodePtr> values = {DocNode::make_scalar(Scalar::number_from_int(0)),
                                 DocNode::make_scalar(Scalar::number_from_double(2.5)), DocNode::string("a"),
                                 DocNode::make_scalar(Scalar::boolean(true)), DocNode::make_scalar(Scalar::null())};
  std::vector<NodePtr> seqs;
  std::vector<std::set<ScalarType>> tags;
  std::function<void(std::vector<NodePtr>&)> rec = [&](std::vector<NodePtr>& cur) {
    std::set<ScalarType> t;
    for (const auto& v : cur) t.insert(v->scalar().type);
    seqs.push_back(DocNode::make_sequence(cur));
    tags.push_back(t);
    if (cur.size() == 3) return;
    for (const auto& v : values) {
      cur.push_back(v);
      rec(cur);
      cur.pop_back();
    }
  };
  std::vector<NodePtr> start;
  rec(start);
  for (std::size_t i = 0; i < seqs.size(); ++i) {
    for (std::size_t j = 0; j < seqs.size(); ++j) {
      ASSERT_EQ(structural_type(*seqs[i]) == structural_type(*seqs[j]), tags[i] == tags[j]);
    }
  }
}

// --- properties --------------------------------------------------------------

TEST(DiffProperty, MatchesNaiveOracleOnSmallTrees) {
  DeterministicRng rng(2024);
  int compared = 0;
  for (int i = 0; i < 3000; ++i) {
    auto a = testing::random_tree(rng, 30);
    auto b = rng.bernoulli(0.7) ? mutate(a, rng) : testing::random_tree(rng, 30);
    if (a->node_count() > 30 || b->node_count() > 30) continue;
    NaiveDiff oracle;
    oracle.walk(*a, *b, {}, false);
    std::sort(oracle.rows.begin(), oracle.rows.end());
    ASSERT_EQ(rows_of(diff_trees(a, b)), oracle.rows) << i;
    ++compared;
  }
  EXPECT_GT(compared, 2500);
}

TEST(DiffProperty, ReflexiveAndSymmetric) {
  DeterministicRng rng(7);
  for (int i = 0; i < 2000; ++i) {
    auto a = testing::random_tree(rng, 40);
    auto b = mutate(a, rng);
    EXPECT_EQ(diff_trees(a, a).verdict, Verdict::identical);
    EXPECT_EQ(diff_trees(a, b).verdict, diff_trees(b, a).verdict);
    auto ab = diff_trees(a, b);
    EXPECT_EQ(ab.verdict == Verdict::identical, ab.changes.empty());
  }
}

TEST(DiffProperty, SerializationInvariance) {
  DeterministicRng rng(8);
  for (int i = 0; i < 300; ++i) {
    auto root = DocNode::make_mapping({{"openapi", DocNode::string("3.1.0")}, {"body", testing::random_tree(rng, 40)}});
    for (auto fmt : {SourceFormat::yaml, SourceFormat::json}) {
      auto again = parse_definition(serialize(*root, fmt), fmt);
      EXPECT_EQ(diff_trees(root, again.root_ptr()).verdict, Verdict::identical);
    }
  }
}

TEST(DiffProperty, AddingASignificantChangeNeverHelps) {
  DeterministicRng rng(9);
  for (int i = 0; i < 1000; ++i) {
    auto a = DocNode::make_mapping({{"openapi", DocNode::string("3.0.0")}, {"t", testing::random_tree(rng, 25)}});
    auto b = mutate(a, rng);
    auto before = diff_trees(a, b).verdict;
    auto entries = b->is_mapping() ? b->entries() : std::vector<MappingEntry>{};
    if (!b->is_mapping()) continue;
    entries.emplace_back("zz-significant", DocNode::string("new"));
    auto worse = DocNode::make_mapping(std::move(entries));
    auto after = diff_trees(a, worse).verdict;
    EXPECT_EQ(after, Verdict::different);
    EXPECT_GE(rank(after), rank(before));
  }
}

}  // namespace
}  // namespace oasfim
