#include "oasfim/curation.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <iterator>
#include <map>
#include <optional>
#include <regex>
#include <stdexcept>

#include "oasfim/error.hpp"
#include "oasfim/hashing.hpp"

namespace oasfim {

std::string_view to_string(RejectReason reason) {
  switch (reason) {
    case RejectReason::too_small:
      return "too_small";
    case RejectReason::producer_cap:
      return "producer_cap";
    case RejectReason::duplicate_version:
      return "duplicate_version";
    case RejectReason::generated:
      return "generated";
    case RejectReason::excluded_producer:
      return "excluded_producer";
    case RejectReason::unparseable:
      return "unparseable";
  }
  return "?";
}

void CurationRules::validate() const {
  if (max_per_producer < 1) throw std::invalid_argument("max_per_producer must be at least 1");
  if (!(generated_operation_id_share > 0.0 && generated_operation_id_share <= 1.0)) {
    throw std::invalid_argument("generated_operation_id_share must lie in (0, 1]");
  }
}

CurationRules CurationRules::from_json(const nlohmann::json& j) {
  CurationRules r;
  r.max_per_producer = j.value("max_per_producer", r.max_per_producer);
  r.min_lines = j.value("min_lines", r.min_lines);
  r.prefer_lines = j.value("prefer_lines", r.prefer_lines);
  r.excluded_producers = j.value("excluded_producers", r.excluded_producers);
  r.exclude_multi_version = j.value("exclude_multi_version", r.exclude_multi_version);
  r.exclude_generated = j.value("exclude_generated", r.exclude_generated);
  r.producer_from_contact_url = j.value("producer_from_contact_url", r.producer_from_contact_url);
  r.generated_operation_id_share = j.value("generated_operation_id_share", r.generated_operation_id_share);
  r.generated_min_operations = j.value("generated_min_operations", r.generated_min_operations);
  r.validate();
  return r;
}

nlohmann::ordered_json CurationRules::to_json() const {
  nlohmann::ordered_json j;
  j["max_per_producer"] = max_per_producer;
  j["min_lines"] = min_lines;
  j["prefer_lines"] = prefer_lines;
  j["excluded_producers"] = excluded_producers;
  j["exclude_multi_version"] = exclude_multi_version;
  j["exclude_generated"] = exclude_generated;
  j["producer_from_contact_url"] = producer_from_contact_url;
  j["generated_operation_id_share"] = generated_operation_id_share;
  j["generated_min_operations"] = generated_min_operations;
  return j;
}

nlohmann::ordered_json CurationReport::to_json() const {
  nlohmann::ordered_json j;
  j["seed"] = seed;
  j["rules"] = rules.to_json();
  j["selected"] = nlohmann::ordered_json::array();
  for (const auto& s : selected) {
    j["selected"].push_back({{"path", s.path}, {"producer", s.producer}, {"line_count", s.line_count}});
  }
  j["rejected"] = nlohmann::ordered_json::array();
  for (const auto& r : rejected) j["rejected"].push_back({{"path", r.path}, {"reason", to_string(r.reason)}});
  return j;
}

std::string CurationReport::dump() const { return to_json().dump(2) + "\n"; }

std::string url_host(std::string_view url) {
  auto scheme = url.find("://");
  if (scheme == std::string_view::npos) return {};
  auto rest = url.substr(scheme + 3);
  auto end = rest.find_first_of("/?#");
  auto authority = rest.substr(0, end);
  if (auto at = authority.rfind('@'); at != std::string_view::npos) authority.remove_prefix(at + 1);
  if (auto colon = authority.find(':'); colon != std::string_view::npos) authority = authority.substr(0, colon);
  std::string host(authority);
  std::transform(host.begin(), host.end(), host.begin(), [](unsigned char c) { return std::tolower(c); });
  return host;
}

std::string producer_of(const ApiDocument& doc, std::string_view relative_path, bool use_contact_url) {
  if (use_contact_url && doc.root().is_mapping()) {
    if (const DocNode* info = doc.root().find("info"); info != nullptr && info->is_mapping()) {
      if (const DocNode* contact = info->find("contact"); contact != nullptr && contact->is_mapping()) {
        if (auto url = contact->string_at("url")) {
          if (auto host = url_host(*url); !host.empty()) return host;
        }
      }
    }
  }
  std::vector<std::string_view> parts;
  std::string_view rest = relative_path;
  while (!rest.empty()) {
    auto slash = rest.find('/');
    auto part = rest.substr(0, slash);
    if (!part.empty() && part != ".") parts.push_back(part);
    if (slash == std::string_view::npos) break;
    rest.remove_prefix(slash + 1);
  }
  if (!parts.empty() && parts.front() == "APIs") parts.erase(parts.begin());
  // The last part is the file name itself.
  if (parts.size() >= 2) return std::string(parts.front());
  return "unknown";
}

std::string_view mechanical_operation_id_pattern(std::string_view id) {
  static const std::regex verb_noun_hash("[A-Za-z]+(_[A-Za-z0-9]+)+_[0-9a-fA-F]{6,}");
  static const std::regex method_path("(get|post|put|delete|patch|head|options|trace)[_/].*(/|__|\\{).*",
                                      std::regex::icase);
  static const std::regex controller_action("[A-Z][A-Za-z0-9]*Controller_[A-Za-z0-9]+");
  static const std::regex numbered("(operation|op|endpoint)_?[0-9]+", std::regex::icase);
  std::string s(id);
  if (std::regex_match(s, verb_noun_hash)) return "verb_noun_hash";
  if (std::regex_match(s, method_path)) return "method_path";
  if (std::regex_match(s, controller_action)) return "controller_action";
  if (std::regex_match(s, numbered)) return "numbered";
  return {};
}

namespace {

bool has_generator_key(const DocNode& n) {
  return n.is_mapping() && (n.find("x-generator") != nullptr || n.find("x-origin") != nullptr);
}

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
  return s;
}

void collect_operation_ids(const DocNode& root, std::vector<std::string>& out) {
  const DocNode* paths = root.find("paths");
  if (paths == nullptr || !paths->is_mapping()) return;
  for (const auto& [_, item] : paths->entries()) {
    if (!item->is_mapping()) continue;
    for (const auto& [__, op] : item->entries()) {
      if (!op->is_mapping()) continue;
      if (auto id = op->string_at("operationId")) out.push_back(*id);
    }
  }
}

}  // namespace

bool producer_matches(std::string_view producer, std::string_view excluded) {
  if (producer == excluded) return true;
  // Subdomains of an excluded host belong to the same producer.
  return producer.size() > excluded.size() && producer.ends_with(excluded) &&
         producer[producer.size() - excluded.size() - 1] == '.';
}

bool detect_generated(const ApiDocument& doc, double share, std::size_t min_operations) {
  const DocNode& root = doc.root();
  if (!root.is_mapping()) return false;
  if (has_generator_key(root)) return true;
  const DocNode* info = root.find("info");
  if (info != nullptr && has_generator_key(*info)) return true;
  if (info != nullptr && info->is_mapping()) {
    if (auto desc = info->string_at("description")) {
      auto d = lower(*desc);
      if (d.find("auto-generated") != std::string::npos || d.find("generated by") != std::string::npos) {
        return true;
      }
    }
  }
  std::vector<std::string> ids;
  collect_operation_ids(root, ids);
  if (ids.empty() || ids.size() < min_operations) return false;
  std::map<std::string_view, std::size_t> by_pattern;
  for (const auto& id : ids) {
    if (auto p = mechanical_operation_id_pattern(id); !p.empty()) ++by_pattern[p];
  }
  for (const auto& [_, count] : by_pattern) {
    if (static_cast<double>(count) > share * static_cast<double>(ids.size())) return true;
  }
  return false;
}

CurationReport curate(const std::filesystem::path& input_dir, const CurationRules& rules, std::uint64_t seed) {
  namespace fs = std::filesystem;
  rules.validate();
  if (!fs::is_directory(input_dir)) throw Error("input directory not found: " + input_dir.string());

  struct Candidate {
    std::string path;
    std::string producer;
    std::string title;
    std::string version;
    std::size_t lines = 0;
    std::optional<RejectReason> rejected;
  };
  std::vector<fs::path> files;
  for (const auto& e : fs::recursive_directory_iterator(input_dir)) {
    if (!e.is_regular_file()) continue;
    auto ext = e.path().extension().string();
    if (ext == ".yaml" || ext == ".yml" || ext == ".json") files.push_back(e.path());
  }
  std::vector<Candidate> cands;
  cands.reserve(files.size());
  std::size_t parsed = 0;
  for (const auto& f : files) {
    Candidate c;
    c.path = fs::relative(f, input_dir).generic_string();
    try {
      ApiDocument doc = load_definition(f);
      ++parsed;
      c.lines = doc.line_count();
      c.producer = producer_of(doc, c.path, rules.producer_from_contact_url);
      if (const DocNode* info = doc.root().is_mapping() ? doc.root().find("info") : nullptr;
          info != nullptr && info->is_mapping()) {
        c.title = info->string_at("title").value_or("");
        if (const DocNode* v = info->find("version"); v != nullptr && v->is_scalar()) c.version = v->scalar().text;
      }
      if (std::any_of(rules.excluded_producers.begin(), rules.excluded_producers.end(),
                      [&](const std::string& x) { return producer_matches(c.producer, x); })) {
        c.rejected = RejectReason::excluded_producer;
      } else if (rules.exclude_generated &&
                 detect_generated(doc, rules.generated_operation_id_share, rules.generated_min_operations)) {
        c.rejected = RejectReason::generated;
      }
    } catch (const ParseError&) {
      c.rejected = RejectReason::unparseable;
    }
    cands.push_back(std::move(c));
  }
  if (parsed == 0) throw EmptyInput("no parseable definitions under " + input_dir.string());
  std::sort(cands.begin(), cands.end(), [](const auto& a, const auto& b) { return a.path < b.path; });

  if (rules.exclude_multi_version) {
    std::map<std::pair<std::string, std::string>, std::vector<Candidate*>> groups;
    for (auto& c : cands) {
      if (c.rejected || c.title.empty()) continue;
      groups[{c.producer, c.title}].push_back(&c);
    }
    for (auto& [_, members] : groups) {
      if (members.size() < 2) continue;
      auto keep = std::max_element(members.begin(), members.end(), [](const Candidate* a, const Candidate* b) {
        return std::tie(a->version, a->path) < std::tie(b->version, b->path);
      });
      for (auto* m : members) {
        if (m != *keep) m->rejected = RejectReason::duplicate_version;
      }
    }
  }

  for (auto& c : cands) {
    if (!c.rejected && c.lines < rules.min_lines) c.rejected = RejectReason::too_small;
  }

  std::map<std::string, std::vector<Candidate*>> by_producer;
  for (auto& c : cands) {
    if (!c.rejected) by_producer[c.producer].push_back(&c);
  }
  const std::string seed_text = std::to_string(seed);
  for (auto& [producer, members] : by_producer) {
    if (members.size() <= rules.max_per_producer) continue;
    std::vector<std::pair<std::tuple<bool, std::size_t, std::uint64_t>, Candidate*>> ranked;
    for (auto* m : members) {
      ranked.push_back({{m->lines >= rules.prefer_lines, m->lines, derive_seed({"curate", seed_text, m->path})}, m});
    }
    std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) { return a.first > b.first; });
    for (std::size_t i = rules.max_per_producer; i < ranked.size(); ++i) {
      ranked[i].second->rejected = RejectReason::producer_cap;
    }
  }

  CurationReport report;
  report.seed = seed;
  report.rules = rules;
  for (const auto& c : cands) {
    if (c.rejected) {
      report.rejected.push_back({c.path, *c.rejected});
    } else {
      report.selected.push_back({c.path, c.producer, c.lines});
    }
  }
  return report;
}

}  // namespace oasfim
