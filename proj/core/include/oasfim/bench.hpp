#pragma once

#include <chrono>
#include <cstddef>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "oasfim/casegen.hpp"
#include "oasfim/document.hpp"
#include "oasfim/prompting.hpp"
#include "oasfim/tokenizer.hpp"

namespace oasfim {

/// Greedy decoding that stops at EOT, after max_new_tokens, or once
/// line_cap lines have been produced, whichever comes first.
struct GenParams {
  std::size_t max_new_tokens = 384;
  std::size_t line_cap = 15;
  double timeout_seconds = 120.0;
};

struct CompletionRequest {
  const TestCase& test_case;
  const Prompt& prompt;
  const Tokenizer& tokenizer;
  GenParams params;
};

/// Source of completions. Implementations used with parallel runs must be
/// safe to call from several threads.
class Backend {
 public:
  virtual ~Backend() = default;
  virtual std::string name() const = 0;
  /// Raw generated text. Throws BackendError or BackendTimeout.
  virtual std::string generate(const CompletionRequest& request) = 0;
};

/// Returns the ground-truth middle of each case.
class OracleBackend final : public Backend {
 public:
  std::string name() const override { return "oracle"; }
  std::string generate(const CompletionRequest& request) override { return request.test_case.middle; }
};

/// Stored completions keyed by case id, read from JSON-lines of
/// {"case_id": ..., "text": ...}.
class ReplayBackend final : public Backend {
 public:
  explicit ReplayBackend(std::map<std::string, std::string> completions) : completions_(std::move(completions)) {}
  static ReplayBackend from_jsonl(std::istream& in);
  static ReplayBackend from_file(const std::filesystem::path& path);

  std::string name() const override { return "replay"; }
  std::string generate(const CompletionRequest& request) override;
  std::size_t size() const noexcept { return completions_.size(); }

 private:
  std::map<std::string, std::string> completions_;
};

void write_replay_jsonl(std::ostream& out, const std::map<std::string, std::string>& completions);

struct HttpBackendConfig {
  std::string endpoint;  // base URL; requests go to {endpoint}/generate
  std::string token;     // sent as "Authorization: Bearer <token>" when set
  bool send_token_ids = false;
  double timeout_seconds = 120.0;

  /// Reads {"endpoint", "token", "send_token_ids", "timeout_seconds"} from an
  /// optional JSON file; OASFIM_ENDPOINT and OASFIM_TOKEN override it.
  static HttpBackendConfig load(const std::optional<std::filesystem::path>& config_file);
};

/// Text-generation endpoint client:
///   POST {endpoint}/generate
///   {"inputs": "<PRE>...<MID>" | "input_ids": [...],
///    "parameters": {"max_new_tokens": N, "do_sample": false, "stop": ["<EOT>"]}}
/// Response: {"generated_text": "..."} (a one-element array of that is
/// accepted too).
class HttpBackend final : public Backend {
 public:
  explicit HttpBackend(HttpBackendConfig config);

  std::string name() const override { return "http"; }
  std::string generate(const CompletionRequest& request) override;

  /// The JSON body sent for a request.
  static nlohmann::json request_body(const CompletionRequest& request, bool send_token_ids);

 private:
  HttpBackendConfig config_;
  std::string base_url_;
  std::string path_prefix_;
};

/// Drops sentinel strings, cuts at the first EOT string and keeps at most
/// line_cap lines.
std::string postprocess_completion(std::string_view raw, const Tokenizer& tokenizer, std::size_t line_cap);

/// Number of UTF-8 scalar values (invalid bytes count one each).
std::size_t count_chars(std::string_view text);

struct CompletionResult {
  std::string text;
  std::size_t gen_chars = 0;
  double gen_seconds = 0.0;
  std::string backend;
  bool failed = false;
  std::string error;

  double chars_per_second() const { return gen_seconds > 0.0 ? static_cast<double>(gen_chars) / gen_seconds : 0.0; }
};

/// Calls the backend, retrying once on failure, and times dispatch to
/// last byte. Failures are recorded in the result rather than thrown.
CompletionResult complete(const CompletionRequest& request, Backend& backend);

struct ChangeSummary {
  std::size_t significant = 0;
  std::size_t insignificant = 0;
};

struct CaseResult {
  std::string case_id;
  bool correct = false;
  bool valid = false;
  bool failed = false;  // backend failure
  double chars_per_second = 0.0;
  ChangeSummary changes;
};

/// Reassembles the case with the completion, then: valid = parses and
/// passes validate_structure; correct = valid and semantically identical to
/// the original after reference resolution.
CaseResult evaluate_case(const TestCase& test_case, const CompletionResult& completion, const ApiDocument& original);

/// evaluate_case with the resolved original cached per source document.
class CaseEvaluator {
 public:
  CaseResult evaluate(const TestCase& test_case, const CompletionResult& completion);

 private:
  std::shared_ptr<const ApiDocument> original_for(const TestCase& test_case);

  std::map<std::string, std::shared_ptr<const ApiDocument>> resolved_;
};

struct Metrics {
  double correctness_pct = 0.0;
  double validity_pct = 0.0;
  double speed_mean = 0.0;
  double speed_std = 0.0;
  std::size_t n_cases = 0;
  std::size_t n_failed = 0;
  nlohmann::ordered_json config = nlohmann::ordered_json::object();

  nlohmann::ordered_json to_json() const;
  static Metrics from_json(const nlohmann::ordered_json& j);
};

/// Percentages over all cases; speed mean and population standard
/// deviation over cases whose generation did not fail. Throws EmptyResults.
Metrics aggregate(std::span<const CaseResult> results, nlohmann::ordered_json config = nlohmann::ordered_json::object());

enum class ReportFormat { table, csv, json };

ReportFormat parse_report_format(std::string_view text);
/// Format implied by a report file extension (.md, .csv, .json).
ReportFormat report_format_for(const std::filesystem::path& path);

using LabeledMetrics = std::pair<std::string, Metrics>;

std::string render_report(std::span<const LabeledMetrics> runs, ReportFormat format);
std::vector<LabeledMetrics> parse_report_json(std::string_view json_text);

struct RunConfig {
  PromptConfig prompt;
  GenParams gen;
  std::size_t parallel = 1;
};

struct RunOutcome {
  std::vector<CaseResult> results;  // in case-set order
  Metrics metrics;
  std::size_t backend_failures = 0;
};

/// Builds a prompt per case, completes it and evaluates the result.
/// Cases are dispatched to at most `parallel` threads; results are keyed
/// by case so ordering never affects the metrics.
RunOutcome run_benchmark(const CaseSet& cases, Backend& backend, const Tokenizer& tokenizer, const RunConfig& config);

}  // namespace oasfim
