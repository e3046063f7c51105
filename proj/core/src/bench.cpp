#include "oasfim/bench.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <istream>
#include <mutex>
#include <ostream>
#include <sstream>
#include <thread>

#define CPPHTTPLIB_OPENSSL_SUPPORT
#include <httplib.h>

#include "oasfim/error.hpp"
#include "oasfim/hashing.hpp"
#include "oasfim/semantic_diff.hpp"

namespace oasfim {

// ---------------------------------------------------------------------------
// Backends

ReplayBackend ReplayBackend::from_jsonl(std::istream& in) {
  std::map<std::string, std::string> completions;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      auto j = nlohmann::json::parse(line);
      completions[j.at("case_id").get<std::string>()] = j.at("text").get<std::string>();
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(e.what(), line_no, 1);
    }
  }
  return ReplayBackend(std::move(completions));
}

ReplayBackend ReplayBackend::from_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open replay file " + path.string());
  return from_jsonl(in);
}

std::string ReplayBackend::generate(const CompletionRequest& request) {
  auto it = completions_.find(request.test_case.id);
  if (it == completions_.end()) throw BackendError(404, "no stored completion for case " + request.test_case.id);
  return it->second;
}

void write_replay_jsonl(std::ostream& out, const std::map<std::string, std::string>& completions) {
  for (const auto& [id, text] : completions) {
    nlohmann::ordered_json j;
    j["case_id"] = id;
    j["text"] = text;
    out << j.dump() << '\n';
  }
}

HttpBackendConfig HttpBackendConfig::load(const std::optional<std::filesystem::path>& config_file) {
  HttpBackendConfig c;
  if (config_file) {
    std::ifstream in(*config_file);
    if (!in) throw Error("cannot open backend config " + config_file->string());
    auto j = nlohmann::json::parse(in);
    c.endpoint = j.value("endpoint", c.endpoint);
    c.token = j.value("token", c.token);
    c.send_token_ids = j.value("send_token_ids", c.send_token_ids);
    c.timeout_seconds = j.value("timeout_seconds", c.timeout_seconds);
  }
  if (const char* e = std::getenv("OASFIM_ENDPOINT"); e != nullptr && *e != '\0') c.endpoint = e;
  if (const char* t = std::getenv("OASFIM_TOKEN"); t != nullptr && *t != '\0') c.token = t;
  return c;
}

HttpBackend::HttpBackend(HttpBackendConfig config) : config_(std::move(config)) {
  if (config_.endpoint.empty()) throw Error("HTTP backend needs an endpoint (config file or OASFIM_ENDPOINT)");
  auto scheme = config_.endpoint.find("://");
  if (scheme == std::string::npos) throw Error("endpoint must be an http(s) URL: " + config_.endpoint);
  auto path_start = config_.endpoint.find('/', scheme + 3);
  base_url_ = config_.endpoint.substr(0, path_start);
  path_prefix_ = path_start == std::string::npos ? "" : config_.endpoint.substr(path_start);
  while (!path_prefix_.empty() && path_prefix_.back() == '/') path_prefix_.pop_back();
}

nlohmann::json HttpBackend::request_body(const CompletionRequest& request, bool send_token_ids) {
  nlohmann::json body;
  if (send_token_ids) {
    body["input_ids"] = request.prompt.tokens;
  } else {
    body["inputs"] = render_prompt_text(request.prompt, request.tokenizer);
  }
  body["parameters"] = {{"max_new_tokens", request.params.max_new_tokens},
                        {"do_sample", false},
                        {"stop", {request.tokenizer.sentinel_text(Sentinel::eot)}}};
  return body;
}

std::string HttpBackend::generate(const CompletionRequest& request) {
  httplib::Client client(base_url_);
  auto timeout = std::chrono::duration_cast<std::chrono::microseconds>(
      std::chrono::duration<double>(std::min(config_.timeout_seconds, request.params.timeout_seconds)));
  client.set_connection_timeout(timeout);
  client.set_read_timeout(timeout);
  httplib::Headers headers;
  if (!config_.token.empty()) headers.emplace("Authorization", "Bearer " + config_.token);
  auto body = request_body(request, config_.send_token_ids).dump();
  auto res = client.Post(path_prefix_ + "/generate", headers, body, "application/json");
  if (!res) {
    if (res.error() == httplib::Error::Read) throw BackendTimeout("timed out waiting for " + base_url_);
    throw BackendError(0, "request failed: " + httplib::to_string(res.error()));
  }
  if (res->status != 200) throw BackendError(res->status, res->body);
  try {
    auto j = nlohmann::json::parse(res->body);
    if (j.is_array() && !j.empty()) j = j.front();
    return j.at("generated_text").get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    throw BackendError(res->status, std::string("malformed response: ") + e.what());
  }
}

// ---------------------------------------------------------------------------
// Completion

std::size_t count_chars(std::string_view text) {
  std::size_t n = 0;
  for (std::size_t i = 0; i < text.size();) {
    auto c = static_cast<unsigned char>(text[i]);
    std::size_t len = c < 0x80 ? 1 : (c >> 5) == 0x6 ? 2 : (c >> 4) == 0xE ? 3 : (c >> 3) == 0x1E ? 4 : 1;
    bool valid = i + len <= text.size();
    for (std::size_t k = 1; valid && k < len; ++k) valid = (static_cast<unsigned char>(text[i + k]) & 0xC0) == 0x80;
    i += valid ? len : 1;
    ++n;
  }
  return n;
}

std::string postprocess_completion(std::string_view raw, const Tokenizer& tokenizer, std::size_t line_cap) {
  std::string text(raw);
  if (auto eot = text.find(tokenizer.sentinel_text(Sentinel::eot)); eot != std::string::npos) text.resize(eot);
  for (auto s : {Sentinel::pre, Sentinel::suf, Sentinel::mid}) {
    const auto& marker = tokenizer.sentinel_text(s);
    for (auto p = text.find(marker); p != std::string::npos; p = text.find(marker, p)) text.erase(p, marker.size());
  }
  std::size_t newlines = 0;
  for (std::size_t i = 0; i < text.size(); ++i) {
    if (text[i] == '\n' && ++newlines == line_cap) {
      text.resize(i + 1);
      break;
    }
  }
  return text;
}

CompletionResult complete(const CompletionRequest& request, Backend& backend) {
  CompletionResult result;
  result.backend = backend.name();
  for (int attempt = 0; attempt < 2; ++attempt) {
    auto start = std::chrono::steady_clock::now();
    try {
      std::string raw = backend.generate(request);
      auto elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
      result.text = postprocess_completion(raw, request.tokenizer, request.params.line_cap);
      result.gen_chars = count_chars(result.text);
      result.gen_seconds = std::max(elapsed, 1e-9);
      result.failed = false;
      result.error.clear();
      return result;
    } catch (const Error& e) {
      auto elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
      result.failed = true;
      result.error = e.what();
      result.gen_seconds = std::max(elapsed, 1e-9);
    }
  }
  return result;
}

// ---------------------------------------------------------------------------
// Evaluation

namespace {

// Resolution that tolerates dangling targets by keeping the unresolved tree.
ApiDocument resolve_lenient(const ApiDocument& doc) {
  try {
    return resolve_refs(doc);
  } catch (const DanglingRef&) {
    return doc;
  }
}

CaseResult evaluate_against(const TestCase& test_case, const CompletionResult& completion,
                            const ApiDocument& resolved_original) {
  CaseResult r;
  r.case_id = test_case.id;
  r.failed = completion.failed;
  r.chars_per_second = completion.failed ? 0.0 : completion.chars_per_second();
  if (completion.failed) return r;
  std::optional<ApiDocument> candidate;
  try {
    candidate.emplace(parse_definition(reassemble(test_case, completion.text), resolved_original.source_format()));
  } catch (const ParseError&) {
    return r;
  }
  r.valid = validate_structure(*candidate).is_structurally_valid;
  if (!r.valid) return r;
  auto changes = diff(resolved_original, resolve_lenient(*candidate));
  r.changes = {changes.count(Significance::significant), changes.count(Significance::insignificant)};
  r.correct = changes.verdict != Verdict::different;
  return r;
}

}  // namespace

CaseResult evaluate_case(const TestCase& test_case, const CompletionResult& completion, const ApiDocument& original) {
  return evaluate_against(test_case, completion, resolve_lenient(original));
}

std::shared_ptr<const ApiDocument> CaseEvaluator::original_for(const TestCase& test_case) {
  auto key = sha256_hex(test_case.source_text());
  if (auto it = resolved_.find(key); it != resolved_.end()) return it->second;
  auto doc = std::make_shared<const ApiDocument>(resolve_lenient(parse_definition(test_case.source_text())));
  resolved_.emplace(key, doc);
  return doc;
}

CaseResult CaseEvaluator::evaluate(const TestCase& test_case, const CompletionResult& completion) {
  return evaluate_against(test_case, completion, *original_for(test_case));
}

// ---------------------------------------------------------------------------
// Metrics and reports

nlohmann::ordered_json Metrics::to_json() const {
  nlohmann::ordered_json j;
  j["correctness_pct"] = correctness_pct;
  j["validity_pct"] = validity_pct;
  j["speed_mean"] = speed_mean;
  j["speed_std"] = speed_std;
  j["n_cases"] = n_cases;
  j["n_failed"] = n_failed;
  j["config"] = config;
  return j;
}

Metrics Metrics::from_json(const nlohmann::ordered_json& j) {
  Metrics m;
  m.correctness_pct = j.at("correctness_pct").get<double>();
  m.validity_pct = j.at("validity_pct").get<double>();
  m.speed_mean = j.at("speed_mean").get<double>();
  m.speed_std = j.at("speed_std").get<double>();
  m.n_cases = j.at("n_cases").get<std::size_t>();
  m.n_failed = j.value("n_failed", std::size_t{0});
  if (j.contains("config")) m.config = j.at("config");
  return m;
}

Metrics aggregate(std::span<const CaseResult> results, nlohmann::ordered_json config) {
  if (results.empty()) throw EmptyResults("no case results to aggregate");
  Metrics m;
  m.config = std::move(config);
  m.n_cases = results.size();
  std::size_t correct = 0;
  std::size_t valid = 0;
  std::vector<double> speeds;
  for (const auto& r : results) {
    correct += r.correct ? 1 : 0;
    valid += r.valid ? 1 : 0;
    if (r.failed) {
      ++m.n_failed;
    } else {
      speeds.push_back(r.chars_per_second);
    }
  }
  const auto n = static_cast<double>(results.size());
  m.correctness_pct = 100.0 * static_cast<double>(correct) / n;
  m.validity_pct = 100.0 * static_cast<double>(valid) / n;
  if (!speeds.empty()) {
    // Sorted so the floating-point sum does not depend on result order.
    std::sort(speeds.begin(), speeds.end());
    double sum = 0.0;
    for (double s : speeds) sum += s;
    m.speed_mean = sum / static_cast<double>(speeds.size());
    double sq = 0.0;
    for (double s : speeds) sq += (s - m.speed_mean) * (s - m.speed_mean);
    m.speed_std = std::sqrt(sq / static_cast<double>(speeds.size()));
  }
  return m;
}

ReportFormat parse_report_format(std::string_view text) {
  if (text == "table" || text == "md" || text == "markdown") return ReportFormat::table;
  if (text == "csv") return ReportFormat::csv;
  if (text == "json") return ReportFormat::json;
  throw std::invalid_argument("unknown report format '" + std::string(text) + "'");
}

ReportFormat report_format_for(const std::filesystem::path& path) {
  auto ext = path.extension().string();
  if (ext == ".csv") return ReportFormat::csv;
  if (ext == ".json") return ReportFormat::json;
  return ReportFormat::table;
}

namespace {

std::string fixed(double v, int digits) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(digits) << v;
  return os.str();
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

std::size_t parallelism_of(const Metrics& m) {
  if (m.config.contains("parallel") && m.config["parallel"].is_number_integer()) {
    auto p = m.config["parallel"].get<std::int64_t>();
    if (p > 1) return static_cast<std::size_t>(p);
  }
  return 1;
}

}  // namespace

std::string render_report(std::span<const LabeledMetrics> runs, ReportFormat format) {
  if (format == ReportFormat::json) {
    nlohmann::ordered_json j;
    j["runs"] = nlohmann::ordered_json::array();
    for (const auto& [label, m] : runs) j["runs"].push_back({{"label", label}, {"metrics", m.to_json()}});
    return j.dump(2) + "\n";
  }
  if (format == ReportFormat::csv) {
    std::string out = "label,correctness_pct,validity_pct,speed_mean,speed_std,n_cases,n_failed,config\n";
    for (const auto& [label, m] : runs) {
      out += csv_field(label) + "," + fixed(m.correctness_pct, 2) + "," + fixed(m.validity_pct, 2) + "," +
             fixed(m.speed_mean, 2) + "," + fixed(m.speed_std, 2) + "," + std::to_string(m.n_cases) + "," +
             std::to_string(m.n_failed) + "," + csv_field(m.config.dump()) + "\n";
    }
    return out;
  }
  const std::vector<std::string> header = {"Model / Solution", "Correctness, %", "Validity, %", "Speed, chars/s",
                                           "Speed std",        "Cases",          "Failed"};
  std::vector<std::vector<std::string>> rows;
  std::vector<std::string> notes;
  for (const auto& [label, m] : runs) {
    std::string name = label;
    if (auto p = parallelism_of(m); p > 1) {
      name += " *";
      notes.push_back("* " + label + ": run with --parallel " + std::to_string(p) +
                      "; speed is not comparable with sequential runs.");
    }
    rows.push_back({name, fixed(m.correctness_pct, 1), fixed(m.validity_pct, 1), fixed(m.speed_mean, 1),
                    fixed(m.speed_std, 1), std::to_string(m.n_cases), std::to_string(m.n_failed)});
  }
  std::vector<std::size_t> width(header.size());
  for (std::size_t c = 0; c < header.size(); ++c) {
    width[c] = header[c].size();
    for (const auto& r : rows) width[c] = std::max(width[c], r[c].size());
  }
  auto line = [&](const std::vector<std::string>& cells) {
    std::string out = "|";
    for (std::size_t c = 0; c < cells.size(); ++c) {
      std::string cell = cells[c];
      std::string pad(width[c] - cell.size(), ' ');
      out += " " + (c == 0 ? cell + pad : pad + cell) + " |";
    }
    return out + "\n";
  };
  std::string out = line(header);
  out += "|";
  for (std::size_t c = 0; c < header.size(); ++c) {
    out += c == 0 ? " " + std::string(width[c], '-') + " |" : " " + std::string(width[c] - 1, '-') + ": |";
  }
  out += "\n";
  for (const auto& r : rows) out += line(r);
  if (!notes.empty()) {
    out += "\n";
    for (const auto& n : notes) out += n + "\n";
  }
  bool any_config = false;
  for (const auto& [label, m] : runs) {
    if (m.config.empty()) continue;
    out += (any_config ? "" : "\n") + std::string("Config of ") + label + ": `" + m.config.dump() + "`\n";
    any_config = true;
  }
  return out;
}

std::vector<LabeledMetrics> parse_report_json(std::string_view json_text) {
  auto j = nlohmann::ordered_json::parse(json_text);
  std::vector<LabeledMetrics> runs;
  for (const auto& r : j.at("runs")) runs.emplace_back(r.at("label").get<std::string>(), Metrics::from_json(r.at("metrics")));
  return runs;
}

// ---------------------------------------------------------------------------
// Runner

RunOutcome run_benchmark(const CaseSet& cases, Backend& backend, const Tokenizer& tokenizer, const RunConfig& config) {
  config.prompt.validate();
  const std::size_t n = cases.cases.size();
  RunOutcome outcome;
  outcome.results.resize(n);

  // Parse each source document once; prompts with components need it.
  std::map<std::string, std::shared_ptr<const ApiDocument>> originals;
  std::vector<std::shared_ptr<const ApiDocument>> doc_of(n);
  CaseEvaluator evaluator;
  for (std::size_t i = 0; i < n; ++i) {
    const auto& c = cases.cases[i];
    auto text = c.source_text();
    auto key = sha256_hex(text);
    auto it = originals.find(key);
    if (it == originals.end()) {
      it = originals.emplace(key, std::make_shared<const ApiDocument>(parse_definition(std::move(text)))).first;
    }
    doc_of[i] = it->second;
  }

  std::vector<CompletionResult> completions(n);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < n; i = next++) {
      const auto& c = cases.cases[i];
      Prompt prompt = build_prompt(c, *doc_of[i], config.prompt, tokenizer);
      GenParams params = config.gen;
      params.line_cap = config.prompt.line_cap;
      params.max_new_tokens = config.prompt.generation_budget;
      completions[i] = complete({c, prompt, tokenizer, params}, backend);
    }
  };
  const std::size_t threads = std::max<std::size_t>(1, std::min(config.parallel, n));
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(threads);
    for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }

  for (std::size_t i = 0; i < n; ++i) {
    outcome.results[i] = evaluator.evaluate(cases.cases[i], completions[i]);
    if (completions[i].failed) ++outcome.backend_failures;
  }
  nlohmann::ordered_json echo;
  echo["backend"] = backend.name();
  echo["tokenizer"] = tokenizer.name();
  echo["format"] = to_string(config.prompt.format);
  echo["context_size"] = config.prompt.context_size;
  echo["prefix_ratio"] = config.prompt.prefix_ratio;
  echo["include_components"] = config.prompt.include_components;
  echo["max_new_tokens"] = config.prompt.generation_budget;
  echo["line_cap"] = config.prompt.line_cap;
  echo["parallel"] = config.parallel;
  echo["case_seed"] = cases.seed;
  if (n > 0) outcome.metrics = aggregate(outcome.results, std::move(echo));
  return outcome;
}

}  // namespace oasfim
