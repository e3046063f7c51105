// One PASS/FAIL line per acceptance criterion. `--only N` runs a single one.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "oasfim/bench.hpp"
#include "oasfim/casegen.hpp"
#include "oasfim/curation.hpp"
#include "oasfim/fim_datagen.hpp"
#include "oasfim/prompting.hpp"
#include "oasfim/semantic_diff.hpp"
#include "oasfim/tokenizer.hpp"
#include "test_support.hpp"

namespace {

using namespace oasfim;
using Clock = std::chrono::steady_clock;

struct Outcome {
  bool pass = true;
  std::string detail;

  void expect(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      if (!detail.empty()) detail += "; ";
      detail += what;
    }
  }
};

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

std::string fmt(double v, int digits = 4) {
  std::ostringstream os;
  os.setf(std::ios::fixed);
  os.precision(digits);
  os << v;
  return os.str();
}

std::vector<CorpusEntry> mini_corpus() { return load_corpus(testing::data_dir() / "mini_corpus"); }

Outcome oracle_benchmark() {
  Outcome o;
  auto start = Clock::now();
  auto corpus = mini_corpus();
  o.expect(corpus.size() == 5, "corpus has " + std::to_string(corpus.size()) + " documents");
  for (const auto& e : corpus) o.expect(count_lines(e.text) >= 60, e.path + " under 60 lines");
  auto cases = generate_cases(corpus, 10, 42);
  OracleBackend backend;
  ByteTokenizer tok;
  auto run = run_benchmark(cases, backend, tok, RunConfig{});
  double elapsed = seconds_since(start);
  o.expect(run.metrics.n_cases == 50, "expected 50 cases");
  o.expect(run.metrics.correctness_pct == 100.0, "correctness " + fmt(run.metrics.correctness_pct));
  o.expect(run.metrics.validity_pct == 100.0, "validity " + fmt(run.metrics.validity_pct));
  o.expect(elapsed < 10.0, "took " + fmt(elapsed, 2) + " s");
  if (o.pass) o.detail = "50 cases, 100% correct and valid in " + fmt(elapsed, 2) + " s";
  return o;
}

std::string trim_left(const std::string& s) {
  auto p = s.find_first_not_of(" \t");
  return p == std::string::npos ? std::string() : s.substr(p);
}

bool subjective_line(const std::string& trimmed) {
  std::string t = trimmed;
  if (!t.empty() && t[0] == '"') t.erase(0, 1);
  if (t.rfind("- ", 0) == 0) t.erase(0, 2);
  for (const char* k : {"description", "summary", "title", "example", "x-"}) {
    if (t.rfind(k, 0) == 0) return true;
  }
  return false;
}

// Deletes the first full line of the middle that carries structure.
std::optional<std::string> drop_significant_line(const std::string& middle) {
  std::vector<std::string> lines;
  std::string cur;
  for (char c : middle) {
    cur += c;
    if (c == '\n') {
      lines.push_back(cur);
      cur.clear();
    }
  }
  if (!cur.empty()) lines.push_back(cur);
  for (std::size_t i = 1; i < lines.size(); ++i) {
    auto t = trim_left(lines[i]);
    if (t.empty() || t == "\n" || t[0] == '#' || subjective_line(t)) continue;
    std::string out;
    for (std::size_t j = 0; j < lines.size(); ++j) {
      if (j != i) out += lines[j];
    }
    return out;
  }
  return std::nullopt;
}

Outcome corruption_sensitivity() {
  Outcome o;
  auto cases = generate_cases(mini_corpus(), 10, 42);
  std::map<std::string, std::string> replay;
  std::size_t fallback = 0;
  for (const auto& c : cases.cases) {
    auto mutated = drop_significant_line(c.middle);
    if (!mutated) ++fallback;
    replay[c.id] = mutated ? *mutated : std::string();
  }
  ReplayBackend backend(std::move(replay));
  ByteTokenizer tok;
  auto run = run_benchmark(cases, backend, tok, RunConfig{});
  o.expect(run.metrics.correctness_pct == 0.0, "correctness " + fmt(run.metrics.correctness_pct));
  o.expect(run.metrics.correctness_pct <= run.metrics.validity_pct, "correctness above validity");
  o.expect(run.backend_failures == 0, "backend failures");
  if (o.pass) {
    o.detail = "correctness 0.0%, validity " + fmt(run.metrics.validity_pct, 1) + "% over " +
               std::to_string(run.metrics.n_cases) + " cases (" + std::to_string(fallback) + " emptied)";
  }
  return o;
}

const char* kDiffBase = R"(openapi: 3.0.0
info:
  title: Shop
  description: Sells things.
  version: '1'
paths:
  /items:
    get:
      summary: List items
      description: All items.
      parameters:
        - name: limit
          in: query
          schema: {type: integer}
      responses:
        '200':
          description: ok
          content:
            application/json:
              schema:
                type: object
                properties:
                  id: {type: string}
              example: {id: abc, count: 3}
)";

std::string replace_once(std::string text, const std::string& from, const std::string& to) {
  auto p = text.find(from);
  if (p != std::string::npos) text.replace(p, from.size(), to);
  return text;
}

Outcome diff_heuristics() {
  Outcome o;
  const std::string base = kDiffBase;
  const std::string reordered = replace_once(
      replace_once(base, "  title: Shop\n  description: Sells things.\n", "  description: Sells things.\n  title: Shop\n"),
      "          in: query\n          schema: {type: integer}\n", "          schema: {type: integer}\n          in: query\n");
  struct Pair {
    std::string name;
    std::string candidate;
    Verdict expected;
  };
  const std::vector<Pair> pairs = {
      {"identical", base, Verdict::identical},
      {"key reorder", reordered, Verdict::identical},
      {"description edit", replace_once(base, "All items.", "Every item in stock."), Verdict::insignificant_only},
      {"summary edit", replace_once(base, "List items", "Lists the items"), Verdict::insignificant_only},
      {"title edit", replace_once(base, "title: Shop", "title: Store"), Verdict::insignificant_only},
      {"example same type", replace_once(base, "{id: abc, count: 3}", "{id: xyz, count: 9}"), Verdict::insignificant_only},
      {"example type change", replace_once(base, "{id: abc, count: 3}", "{id: 7, count: 3}"), Verdict::different},
      {"schema type change", replace_once(base, "id: {type: string}", "id: {type: integer}"), Verdict::different},
  };
  auto original = resolve_refs(parse_definition(base));
  for (const auto& p : pairs) {
    o.expect(p.candidate != base || p.expected == Verdict::identical, p.name + " fixture did not change");
    auto verdict = diff(original, resolve_refs(parse_definition(p.candidate))).verdict;
    o.expect(verdict == p.expected,
             p.name + ": got " + std::string(to_string(verdict)) + ", want " + std::string(to_string(p.expected)));
  }
  if (o.pass) o.detail = std::to_string(pairs.size()) + " pairs classified exactly";
  return o;
}

Outcome prompt_goldens() {
  Outcome o;
  auto cases = read_case_set(testing::data_dir() / "mini_cases.jsonl");
  auto goldens = nlohmann::json::parse(testing::read_file(testing::data_dir() / "prompt_goldens.json"))["goldens"];
  ByteTokenizer tok;
  std::size_t checked = 0;
  std::size_t formats[2] = {0, 0};
  for (const auto& g : goldens) {
    const auto* c = cases.find(g["id"].get<std::string>());
    if (c == nullptr) {
      o.expect(false, "unknown case " + g["id"].get<std::string>());
      continue;
    }
    PromptConfig cfg;
    cfg.format = parse_fim_format(g["format"].get<std::string>());
    cfg.context_size = g["context_size"].get<std::size_t>();
    cfg.prefix_ratio = g["prefix_ratio"].get<double>();
    auto p = build_prompt(c->prefix, c->suffix, cfg, tok);
    auto want = g["tokens"].get<std::vector<TokenId>>();
    o.expect(p.tokens == want, c->id + " " + g["format"].get<std::string>() + " at " +
                                   std::to_string(cfg.context_size) + " differs");
    ++formats[cfg.format == FimFormat::psm ? 0 : 1];
    ++checked;
  }
  std::set<std::string> ids;
  for (const auto& g : goldens) ids.insert(g["id"].get<std::string>());
  o.expect(ids.size() == 10, std::to_string(ids.size()) + " distinct cases in goldens");
  o.expect(formats[0] > 0 && formats[1] > 0, "both formats present");

  const std::string big(20000, 'x');
  for (std::size_t c : {1024u, 2048u, 3072u, 4096u, 5120u, 6144u, 7168u}) {
    PromptConfig cfg;
    cfg.context_size = c;
    auto p = build_prompt(big, big, cfg, tok);
    auto gap = std::labs(static_cast<long>(p.prefix_tokens_used) - static_cast<long>(p.suffix_tokens_used));
    o.expect(gap <= 1, "imbalance " + std::to_string(gap) + " at " + std::to_string(c));
    o.expect(p.tokens.size() == c, "prompt not full at " + std::to_string(c));
  }
  if (o.pass) o.detail = std::to_string(checked) + " golden prompts match; budget balanced on 7 context sizes";
  return o;
}

Outcome split_round_trip() {
  Outcome o;
  auto corpus = mini_corpus();
  DeterministicRng rng(2024);
  std::size_t bad_round = 0, bad_newlines = 0;
  for (int i = 0; i < 1000; ++i) {
    const auto& entry = corpus[rng.below(corpus.size())];
    std::vector<std::string> lines;
    std::istringstream is(entry.text);
    for (std::string l; std::getline(is, l);) lines.push_back(l);
    auto line = static_cast<std::size_t>(rng.between(1, static_cast<std::int64_t>(lines.size() - kDefaultMaskLines)));
    auto col = rng.below(lines[line - 1].size() + 1);
    auto s = split_at(entry.text, line, col);
    TestCase tc;
    tc.prefix = s.prefix;
    tc.suffix = s.suffix;
    if (reassemble(tc, s.middle) != entry.text) ++bad_round;
    if (std::count(s.middle.begin(), s.middle.end(), '\n') != 10) ++bad_newlines;
  }
  o.expect(bad_round == 0, std::to_string(bad_round) + " round-trip mismatches");
  o.expect(bad_newlines == 0, std::to_string(bad_newlines) + " middles without 10 newlines");
  if (o.pass) o.detail = "1000 draws reassemble byte-exactly, each middle has 10 newlines";
  return o;
}

Outcome packing_contrast() {
  Outcome o;
  auto start = Clock::now();
  std::vector<CorpusEntry> corpus;
  for (std::uint64_t i = 0; i < 20; ++i) {
    corpus.push_back({"doc" + std::to_string(i) + ".yaml", testing::synthetic_definition_bytes(25000, 900 + i)});
  }
  ByteTokenizer tok;
  constexpr double C = 5120;
  auto near_c = [&](const std::vector<TrainingSample>& samples) {
    std::size_t n = 0;
    for (const auto& s : samples) n += std::fabs(static_cast<double>(s.tokens.size()) - C) <= 0.02 * C ? 1 : 0;
    return static_cast<double>(n) / static_cast<double>(samples.size());
  };

  DataGenConfig conventional;
  conventional.context_size = 5120;
  conventional.seed = 11;
  auto conv = generate_training_data(corpus, conventional, tok);
  double conv_share = near_c(conv);
  o.expect(conv_share >= 0.5, "conventional share near C " + fmt(conv_share));

  DataGenConfig splitting = conventional;
  splitting.splitting = SplittingMode::document_splitting;
  std::vector<std::size_t> counts(corpus.size(), 25000);
  for (const auto& unit : packing_units(corpus, counts, splitting)) {
    auto len = unit.end - unit.begin;
    o.expect(len >= 4096 && len <= 6144, "piece of " + std::to_string(len) + " tokens");
  }
  auto split = generate_training_data(corpus, splitting, tok);
  double split_share = near_c(split);
  o.expect(split_share <= 0.10, "document-splitting share near C " + fmt(split_share));
  double elapsed = seconds_since(start);
  o.expect(elapsed < 60.0, "took " + fmt(elapsed, 2) + " s");
  if (o.pass) {
    o.detail = "near-C share " + fmt(conv_share, 3) + " conventional vs " + fmt(split_share, 3) + " split, " +
               fmt(elapsed, 2) + " s";
  }
  return o;
}

Outcome curation_determinism() {
  Outcome o;
  testing::TempDir dir("acceptance-curate");
  std::vector<SelectedDefinition> want_selected;
  std::vector<RejectedDefinition> want_rejected;
  auto add = [&](const std::string& producer, const std::string& file, testing::SyntheticSpec spec,
                 std::optional<RejectReason> reason) {
    auto rel = producer + "/" + file;
    testing::write_file(dir.path() / producer / file, testing::synthetic_definition(spec));
    if (reason) {
      want_rejected.push_back({rel, *reason});
    } else {
      want_selected.push_back({rel, producer, spec.lines});
    }
  };
  auto name = [](char p, int i) { return std::string(1, p) + (i < 10 ? "0" : "") + std::to_string(i) + ".yaml"; };

  // alpha: 35 definitions of distinct size, the 20 largest survive the cap.
  for (int i = 0; i < 35; ++i) {
    testing::SyntheticSpec s;
    s.title = "Alpha " + std::to_string(i);
    s.lines = 3000 + 10 * static_cast<std::size_t>(i);
    add("alpha.com", name('a', i), s, i < 15 ? std::optional(RejectReason::producer_cap) : std::nullopt);
  }
  // beta: three too small, one title in three versions.
  for (int i = 0; i < 15; ++i) {
    testing::SyntheticSpec s;
    s.title = "Beta " + std::to_string(i);
    s.lines = 3400;
    std::optional<RejectReason> reason;
    if (i < 3) {
      s.lines = 2000 + 499 * static_cast<std::size_t>(i);
      reason = RejectReason::too_small;
    } else if (i < 6) {
      s.title = "Beta Multi";
      s.version = std::vector<std::string>{"1.0.0", "1.1.0", "2.0.0"}[static_cast<std::size_t>(i - 3)];
      if (i < 5) reason = RejectReason::duplicate_version;
    }
    add("beta.com", name('b', i), s, reason);
  }
  // gamma: one generated definition.
  for (int i = 0; i < 10; ++i) {
    testing::SyntheticSpec s;
    s.title = "Gamma " + std::to_string(i);
    s.lines = 3100;
    std::optional<RejectReason> reason;
    if (i == 0) {
      s.root_extras = {"x-generator: codegen 2.1"};
      reason = RejectReason::generated;
    }
    add("gamma.com", name('g', i), s, reason);
  }
  auto by_path = [](const auto& a, const auto& b) { return a.path < b.path; };
  std::sort(want_selected.begin(), want_selected.end(), by_path);
  std::sort(want_rejected.begin(), want_rejected.end(), by_path);

  CurationRules rules;
  auto first = curate(dir.path(), rules, 1234);
  auto second = curate(dir.path(), rules, 1234);
  o.expect(first.selected == want_selected, "selected list differs from expectation");
  o.expect(first.rejected == want_rejected, "rejected list differs from expectation");
  o.expect(first.dump() == second.dump(), "two runs differ");
  o.expect(first.selected.size() + first.rejected.size() == 60, "not every file reported");
  if (o.pass) {
    o.detail = std::to_string(first.selected.size()) + " selected, " + std::to_string(first.rejected.size()) +
               " rejected, byte-identical reruns";
  }
  return o;
}

class SlowBackend final : public Backend {
 public:
  std::string name() const override { return "mock"; }
  std::string generate(const CompletionRequest&) override {
    std::this_thread::sleep_for(std::chrono::milliseconds(5000));
    return std::string(100, 'a');
  }
};

Outcome speed_accounting() {
  Outcome o;
  TestCase tc;
  tc.id = "speed";
  ByteTokenizer tok;
  PromptConfig pcfg;
  auto prompt = build_prompt("a", "b", pcfg, tok);
  SlowBackend backend;
  GenParams params;
  params.line_cap = 1000;
  auto r = complete(CompletionRequest{tc, prompt, tok, params}, backend);
  double speed = r.chars_per_second();
  o.expect(!r.failed, "mock failed: " + r.error);
  o.expect(r.gen_chars == 100, "counted " + std::to_string(r.gen_chars) + " chars");
  o.expect(std::fabs(speed - 20.0) <= 2.0, "speed " + fmt(speed));

  std::vector<CaseResult> results(3);
  for (std::size_t i = 0; i < 3; ++i) results[i].chars_per_second = 10.0 * static_cast<double>(i + 1);
  auto m = aggregate(results);
  const double exact_std = std::sqrt(200.0 / 3.0);
  o.expect(std::fabs(m.speed_mean - 20.0) < 1e-9, "mean " + fmt(m.speed_mean, 6));
  o.expect(std::fabs(m.speed_std - exact_std) < 1e-6, "std " + fmt(m.speed_std, 9));
  o.expect(fmt(m.speed_std, 4) == "8.1650", "std rounds to " + fmt(m.speed_std, 4));
  if (o.pass) {
    o.detail = "mock speed " + fmt(speed, 3) + " chars/s; mean 20.0, std " + fmt(m.speed_std, 6);
  }
  return o;
}

void check_partition(Outcome& o, const std::vector<CorpusEntry>& corpus, const DataGenConfig& cfg,
                     const Tokenizer& tok, const std::string& label, std::size_t& total) {
  auto chunks = pack_contexts(corpus, cfg, tok);
  auto samples = generate_training_data(corpus, cfg, tok);
  std::size_t bad = 0;
  for (const auto& s : samples) {
    auto parts = decode_sample(s, tok);
    bool ok = parts.prefix + parts.middle + parts.suffix == tok.decode(chunks.at(s.chunk_index).tokens);
    for (Sentinel k : {Sentinel::pre, Sentinel::suf, Sentinel::mid, Sentinel::eot}) {
      ok = ok && std::count(s.tokens.begin(), s.tokens.end(), tok.sentinel(k)) == 1;
    }
    ok = ok && !s.tokens.empty() && s.tokens.back() == tok.sentinel(Sentinel::eot);
    bad += ok ? 0 : 1;
  }
  o.expect(samples.size() >= 1000, label + ": only " + std::to_string(samples.size()) + " samples");
  o.expect(bad == 0, label + ": " + std::to_string(bad) + " malformed samples");
  total += samples.size();
}

Outcome fim_partition() {
  Outcome o;
  std::vector<CorpusEntry> corpus = mini_corpus();
  for (std::uint64_t i = 0; i < 12; ++i) {
    corpus.push_back({"filler" + std::to_string(i) + ".yaml", testing::synthetic_definition_bytes(20000, 70 + i)});
  }
  ByteTokenizer bytes;
  auto sub = SubwordTokenizer::load(testing::data_dir() / "test_vocab.json");
  std::size_t total = 0;

  DataGenConfig cfg;
  cfg.context_size = 256;
  cfg.seed = 5;
  check_partition(o, corpus, cfg, bytes, "bytes", total);
  cfg.splitting = SplittingMode::document_splitting;
  cfg.spm_joint_encoding = true;
  cfg.context_size = 128;
  check_partition(o, corpus, cfg, *sub, "subword", total);
  if (o.pass) o.detail = std::to_string(total) + " samples partition their chunk, one sentinel each, end in EOT";
  return o;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"acceptance checks"};
  int only = 0;
  app.add_option("--only", only, "run a single criterion")->check(CLI::Range(1, 9));
  CLI11_PARSE(app, argc, argv);

  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"oracle benchmark", oracle_benchmark},
      {"corruption sensitivity", corruption_sensitivity},
      {"semantic diff heuristics", diff_heuristics},
      {"prompt goldens and budget balance", prompt_goldens},
      {"split round trip", split_round_trip},
      {"packing length contrast", packing_contrast},
      {"curation determinism", curation_determinism},
      {"speed accounting", speed_accounting},
      {"training sample partition", fim_partition},
  };
  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    if (only != 0 && static_cast<std::size_t>(only) != i + 1) continue;
    Outcome result;
    try {
      result = criteria[i].second();
    } catch (const std::exception& e) {
      result.pass = false;
      result.detail = std::string("exception: ") + e.what();
    }
    failures += result.pass ? 0 : 1;
    std::cout << (result.pass ? "PASS" : "FAIL") << " criterion " << i + 1 << " (" << criteria[i].first
              << "): " << result.detail << std::endl;
  }
  return failures == 0 ? 0 : 1;
}
