#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "oasfim/document.hpp"

namespace oasfim {

struct CurationRules {
  std::size_t max_per_producer = 20;
  std::size_t min_lines = 3000;
  std::size_t prefer_lines = 20000;
  std::vector<std::string> excluded_producers;
  bool exclude_multi_version = true;
  bool exclude_generated = true;
  /// Attribute producers by info.contact.url before falling back to the
  /// directory layout.
  bool producer_from_contact_url = true;
  /// Share of operationIds that must follow one mechanical pattern for a
  /// definition to count as generated.
  double generated_operation_id_share = 0.9;
  /// Below this many operationIds the share test is skipped.
  std::size_t generated_min_operations = 10;

  void validate() const;
  static CurationRules from_json(const nlohmann::json& j);
  nlohmann::ordered_json to_json() const;
};

enum class RejectReason { too_small, producer_cap, duplicate_version, generated, excluded_producer, unparseable };

std::string_view to_string(RejectReason reason);

struct SelectedDefinition {
  std::string path;
  std::string producer;
  std::size_t line_count = 0;

  bool operator==(const SelectedDefinition&) const = default;
};

struct RejectedDefinition {
  std::string path;
  RejectReason reason = RejectReason::unparseable;

  bool operator==(const RejectedDefinition&) const = default;
};

struct CurationReport {
  std::vector<SelectedDefinition> selected;  // sorted by path
  std::vector<RejectedDefinition> rejected;  // sorted by path
  std::uint64_t seed = 0;
  CurationRules rules;

  nlohmann::ordered_json to_json() const;
  std::string dump() const;
};

/// Host of an http(s) URL, lower-cased and without port; empty if none.
std::string url_host(std::string_view url);

/// Producer of a definition: host of info.contact.url, else the first
/// directory of `relative_path` (after a leading "APIs/" as in the
/// APIs-guru layout), else "unknown".
std::string producer_of(const ApiDocument& doc, std::string_view relative_path, bool use_contact_url = true);

/// Exact match, or `producer` is a subdomain of `excluded`.
bool producer_matches(std::string_view producer, std::string_view excluded);

/// Generator markers: an x-generator or x-origin key at the root or under
/// info, "auto-generated" / "generated by" in info.description, or more than
/// `share` of operationIds following one mechanical naming pattern.
bool detect_generated(const ApiDocument& doc, double share = 0.9, std::size_t min_operations = 10);

/// Name of the mechanical operationId pattern `id` matches, or empty.
std::string_view mechanical_operation_id_pattern(std::string_view id);

/// Filters every .yaml/.yml/.json file under input_dir. First failing rule
/// wins, in the order unparseable, excluded_producer, generated,
/// duplicate_version, too_small, producer_cap. Throws EmptyInput when no
/// file parses.
CurationReport curate(const std::filesystem::path& input_dir, const CurationRules& rules, std::uint64_t seed);

}  // namespace oasfim
