#include "oasfim/cli.hpp"

#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "oasfim/bench.hpp"
#include "oasfim/casegen.hpp"
#include "oasfim/curation.hpp"
#include "oasfim/document.hpp"
#include "oasfim/error.hpp"
#include "oasfim/fim_datagen.hpp"
#include "oasfim/prompting.hpp"
#include "oasfim/semantic_diff.hpp"
#include "oasfim/tokenizer.hpp"

namespace oasfim::cli {
namespace {

namespace fs = std::filesystem;
using ojson = nlohmann::ordered_json;

// Reads {"seed": 7, "tokenizer": "bytes", "run": {"context": 2048}} style
// files: top-level keys are global options, nested objects belong to the
// subcommand of that name.
class JsonConfig final : public CLI::Config {
 public:
  std::string to_config(const CLI::App* app, bool default_also, bool, std::string) const override {
    ojson j = ojson::object();
    for (const CLI::Option* opt : app->get_options()) {
      if (opt->get_lnames().empty() || !opt->get_configurable()) continue;
      const auto& name = opt->get_lnames().front();
      if (opt->count() > 0) {
        auto values = opt->results();
        j[name] = values.size() == 1 ? ojson(values.front()) : ojson(values);
      } else if (default_also && !opt->get_default_str().empty()) {
        j[name] = opt->get_default_str();
      }
    }
    for (const CLI::App* sub : app->get_subcommands({})) {
      auto nested = ojson::parse(to_config(sub, default_also, false, ""));
      if (!nested.empty()) j[sub->get_name()] = nested;
    }
    return j.dump(2);
  }

  std::vector<CLI::ConfigItem> from_config(std::istream& input) const override {
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(input);
    } catch (const nlohmann::json::exception& e) {
      throw CLI::ConversionError(std::string("config file is not valid JSON: ") + e.what());
    }
    std::vector<CLI::ConfigItem> items;
    collect(j, {}, items);
    return items;
  }

 private:
  static std::string scalar_text(const nlohmann::json& v) {
    if (v.is_string()) return v.get<std::string>();
    return v.dump();
  }

  static void collect(const nlohmann::json& j, const std::vector<std::string>& parents,
                      std::vector<CLI::ConfigItem>& items) {
    if (!j.is_object()) throw CLI::ConversionError("config file must hold a JSON object");
    for (const auto& [key, value] : j.items()) {
      if (value.is_object()) {
        auto nested = parents;
        nested.push_back(key);
        collect(value, nested, items);
        continue;
      }
      CLI::ConfigItem item;
      item.parents = parents;
      item.name = key;
      if (value.is_array()) {
        for (const auto& v : value) item.inputs.push_back(scalar_text(v));
      } else {
        item.inputs.push_back(scalar_text(value));
      }
      items.push_back(std::move(item));
    }
  }
};

struct Globals {
  std::string tokenizer = "bytes";
  std::uint64_t seed = 42;
  bool verbose = false;
};

ojson globals_json(const Globals& g) {
  ojson j;
  j["tokenizer"] = g.tokenizer;
  j["seed"] = g.seed;
  return j;
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out << text;
}

// --- curate --------------------------------------------------------------

struct CurateArgs {
  std::string in;
  std::string out;
  std::string rules;
  std::string report;
};

int run_curate(const CurateArgs& a, const Globals& g, std::ostream& out, std::ostream& err) {
  CurationRules rules;
  if (!a.rules.empty()) rules = CurationRules::from_json(nlohmann::json::parse(read_file(a.rules)));
  auto report = curate(a.in, rules, g.seed);
  if (!a.out.empty()) {
    for (const auto& s : report.selected) {
      fs::path dst = fs::path(a.out) / s.path;
      fs::create_directories(dst.parent_path());
      fs::copy_file(fs::path(a.in) / s.path, dst, fs::copy_options::overwrite_existing);
    }
  }
  if (a.report.empty()) {
    out << report.dump();
  } else {
    write_file(a.report, report.dump());
  }
  if (g.verbose) err << report.selected.size() << " selected, " << report.rejected.size() << " rejected\n";
  return ok;
}

// --- gen-cases -----------------------------------------------------------

struct GenCasesArgs {
  std::string corpus;
  std::size_t per_doc = 10;
  std::size_t mask_lines = kDefaultMaskLines;
  std::string out;
};

int run_gen_cases(const GenCasesArgs& a, const Globals& g, std::ostream& out, std::ostream& err) {
  auto corpus = load_corpus(a.corpus);
  if (corpus.empty()) throw EmptyInput("no definitions under " + a.corpus);
  auto cases = generate_cases(corpus, a.per_doc, g.seed, a.mask_lines);
  if (a.out.empty()) {
    write_case_set(out, cases);
  } else {
    std::ostringstream ss;
    write_case_set(ss, cases);
    write_file(a.out, ss.str());
  }
  if (g.verbose) err << cases.cases.size() << " cases from " << corpus.size() << " documents\n";
  return ok;
}

// --- build-prompt --------------------------------------------------------

struct PromptArgs {
  std::string format = "psm";
  std::size_t context = 4096;
  double ratio = 0.5;
  bool components = false;

  PromptConfig config() const {
    PromptConfig c;
    c.format = parse_fim_format(format);
    c.context_size = context;
    c.prefix_ratio = ratio;
    c.include_components = components;
    return c;
  }
};

void add_prompt_options(CLI::App* sub, PromptArgs& p) {
  sub->add_option("--format", p.format, "Sentinel layout")->check(CLI::IsMember({"psm", "spm"}));
  sub->add_option("--context", p.context, "Prompt context size in tokens")->check(CLI::Range(16, 1 << 24));
  sub->add_option("--ratio", p.ratio, "Share of the budget given to the prefix")->check(CLI::Range(0.0, 1.0));
  sub->add_flag("--components", p.components, "Prepend the component names as a comment");
}

struct BuildPromptArgs {
  std::string case_file;
  std::string id;
  PromptArgs prompt;
};

int run_build_prompt(const BuildPromptArgs& a, const Globals& g, std::ostream& out, std::ostream& err) {
  auto tokenizer = make_tokenizer(g.tokenizer);
  auto cases = read_case_set(fs::path(a.case_file));
  const TestCase* c = cases.find(a.id);
  if (c == nullptr) throw OutOfRange("no case with id " + a.id + " in " + a.case_file);
  auto config = a.prompt.config();
  auto doc = parse_definition(c->source_text());
  auto prompt = build_prompt(*c, doc, config, *tokenizer);
  for (std::size_t i = 0; i < prompt.tokens.size(); ++i) out << (i ? " " : "") << prompt.tokens[i];
  out << '\n';
  if (g.verbose) {
    ojson echo = globals_json(g);
    echo["format"] = to_string(config.format);
    echo["context_size"] = config.context_size;
    echo["prefix_ratio"] = config.prefix_ratio;
    echo["include_components"] = config.include_components;
    echo["prefix_tokens_used"] = prompt.prefix_tokens_used;
    echo["suffix_tokens_used"] = prompt.suffix_tokens_used;
    err << "# " << echo.dump() << '\n';
  }
  err << render_prompt_text(prompt, *tokenizer) << '\n';
  return ok;
}

// --- gen-train-data ------------------------------------------------------

struct TrainDataArgs {
  std::string corpus;
  std::size_t context = 5120;
  std::string splitting = "conventional";
  double spm_fraction = 0.5;
  bool spm_joint = false;
  std::string out;
  std::string hist;
  std::size_t bins = 50;
};

int run_gen_train_data(const TrainDataArgs& a, const Globals& g, std::ostream& out, std::ostream& err) {
  auto tokenizer = make_tokenizer(g.tokenizer);
  DataGenConfig config;
  config.context_size = a.context;
  config.splitting = parse_splitting_mode(a.splitting);
  config.spm_fraction = a.spm_fraction;
  config.spm_joint_encoding = a.spm_joint;
  config.seed = g.seed;
  config.validate();
  auto corpus = load_corpus(a.corpus);
  if (corpus.empty()) throw EmptyInput("no definitions under " + a.corpus);
  auto samples = generate_training_data(corpus, config, *tokenizer);

  ojson echo = globals_json(g);
  echo["context_size"] = config.context_size;
  echo["splitting"] = to_string(config.splitting);
  echo["jitter"] = {config.jitter_low, config.jitter_high};
  echo["spm_fraction"] = config.spm_fraction;
  echo["spm_joint_encoding"] = config.spm_joint_encoding;
  echo["documents"] = corpus.size();

  if (a.out.empty()) {
    write_samples_jsonl(out, samples, echo);
  } else {
    std::ostringstream ss;
    write_samples_jsonl(ss, samples, echo);
    write_file(a.out, ss.str());
  }
  if (!a.hist.empty()) {
    auto h = length_histogram(samples, a.bins);
    write_file(a.hist, "# config: " + echo.dump() + "\n" + histogram_csv(h));
  }
  if (g.verbose) err << samples.size() << " samples from " << corpus.size() << " documents\n";
  return ok;
}

// --- diff ----------------------------------------------------------------

struct DiffArgs {
  std::string original;
  std::string candidate;
  bool resolve = false;
};

int run_diff(const DiffArgs& a, const Globals& g, std::ostream& out, std::ostream& err) {
  auto before = load_definition(a.original);
  auto after = load_definition(a.candidate);
  if (a.resolve) {
    before = resolve_refs(before);
    after = resolve_refs(after);
  }
  auto changes = diff(before, after);
  for (const auto& c : changes.changes) out << format_change(c) << '\n';
  if (g.verbose) err << "verdict: " << to_string(changes.verdict) << '\n';
  return changes.verdict == Verdict::different ? verdict : ok;
}

// --- run -----------------------------------------------------------------

struct RunArgs {
  std::string cases;
  PromptArgs prompt;
  std::string backend = "oracle";
  std::string replay;
  std::string backend_config;
  std::size_t parallel = 1;
  std::size_t max_new_tokens = 384;
  std::size_t line_cap = 15;
  std::string out;
  std::string results;
  std::string label;
};

std::unique_ptr<Backend> make_backend(const RunArgs& a) {
  if (a.backend == "oracle") return std::make_unique<OracleBackend>();
  if (a.backend == "replay") {
    if (a.replay.empty()) throw Error("--backend replay needs --replay FILE");
    return std::make_unique<ReplayBackend>(ReplayBackend::from_file(a.replay));
  }
  std::optional<fs::path> config;
  if (!a.backend_config.empty()) config = a.backend_config;
  return std::make_unique<HttpBackend>(HttpBackendConfig::load(config));
}

int run_run(const RunArgs& a, const Globals& g, std::ostream& out, std::ostream& err) {
  auto tokenizer = make_tokenizer(g.tokenizer);
  auto cases = read_case_set(fs::path(a.cases));
  if (cases.cases.empty()) throw EmptyResults("case file holds no cases: " + a.cases);
  auto backend = make_backend(a);
  RunConfig config;
  config.prompt = a.prompt.config();
  config.prompt.generation_budget = a.max_new_tokens;
  config.prompt.line_cap = a.line_cap;
  config.gen.max_new_tokens = a.max_new_tokens;
  config.gen.line_cap = a.line_cap;
  config.parallel = a.parallel;
  auto outcome = run_benchmark(cases, *backend, *tokenizer, config);
  outcome.metrics.config["seed"] = g.seed;

  if (!a.results.empty()) {
    std::ostringstream ss;
    for (const auto& r : outcome.results) {
      ojson j;
      j["case_id"] = r.case_id;
      j["correct"] = r.correct;
      j["valid"] = r.valid;
      j["failed"] = r.failed;
      j["chars_per_second"] = r.chars_per_second;
      j["significant_changes"] = r.changes.significant;
      j["insignificant_changes"] = r.changes.insignificant;
      ss << j.dump() << '\n';
    }
    write_file(a.results, ss.str());
  }

  std::string label = a.label;
  if (label.empty()) {
    label = backend->name() + " " + std::string(to_string(config.prompt.format)) + " " +
            std::to_string(config.prompt.context_size);
  }
  std::vector<LabeledMetrics> runs{{label, outcome.metrics}};
  if (a.out.empty()) {
    out << render_report(runs, ReportFormat::table);
  } else {
    write_file(a.out, render_report(runs, report_format_for(a.out)));
  }
  if (outcome.backend_failures > 0) {
    err << outcome.backend_failures << " of " << cases.cases.size() << " backend calls failed\n";
    return backend_failure;
  }
  if (g.verbose) err << "correctness " << outcome.metrics.correctness_pct << "%, validity " << outcome.metrics.validity_pct << "%\n";
  return ok;
}

// --- report --------------------------------------------------------------

struct ReportArgs {
  std::vector<std::string> inputs;
  std::string format = "table";
  std::string out;
};

int run_report(const ReportArgs& a, std::ostream& out) {
  std::vector<LabeledMetrics> runs;
  for (const auto& in : a.inputs) {
    auto part = parse_report_json(read_file(in));
    runs.insert(runs.end(), part.begin(), part.end());
  }
  auto format = a.out.empty() ? parse_report_format(a.format) : report_format_for(a.out);
  if (a.out.empty()) {
    out << render_report(runs, format);
  } else {
    write_file(a.out, render_report(runs, format));
  }
  return ok;
}

}  // namespace

int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"OpenAPI completion benchmark and fill-in-the-middle data tools", "oasfim"};
  app.option_defaults()->always_capture_default();
  app.require_subcommand(1, 1);
  app.fallthrough();
  app.failure_message(CLI::FailureMessage::help);
  app.config_formatter(std::make_shared<JsonConfig>());
  app.set_config("--config", "", "JSON file of option values; command-line flags take precedence");

  Globals g;
  app.add_option("--tokenizer", g.tokenizer, "\"bytes\" or a vocabulary JSON file");
  app.add_option("--seed", g.seed, "Seed for every randomized step");
  app.add_flag("-v,--verbose", g.verbose, "Print progress to stderr");

  CurateArgs curate_args;
  auto* curate_cmd = app.add_subcommand("curate", "Filter a directory of definitions into a training corpus");
  curate_cmd->add_option("--in", curate_args.in, "Input directory")->required();
  curate_cmd->add_option("--out", curate_args.out, "Copy selected definitions here");
  curate_cmd->add_option("--rules", curate_args.rules, "Curation rules JSON");
  curate_cmd->add_option("--report", curate_args.report, "Write the report here instead of stdout");

  GenCasesArgs cases_args;
  auto* cases_cmd = app.add_subcommand("gen-cases", "Draw masked completion cases from a corpus");
  cases_cmd->add_option("--corpus", cases_args.corpus, "Corpus directory")->required();
  cases_cmd->add_option("--per-doc", cases_args.per_doc, "Cases per document")->check(CLI::PositiveNumber);
  cases_cmd->add_option("--mask-lines", cases_args.mask_lines, "Masked lines per case")->check(CLI::PositiveNumber);
  cases_cmd->add_option("--out", cases_args.out, "Case file (JSON lines); stdout if absent");

  BuildPromptArgs prompt_args;
  auto* prompt_cmd = app.add_subcommand("build-prompt", "Print the token ids of one case's prompt");
  prompt_cmd->add_option("--case-file", prompt_args.case_file, "Case file")->required();
  prompt_cmd->add_option("--id", prompt_args.id, "Case id")->required();
  add_prompt_options(prompt_cmd, prompt_args.prompt);

  TrainDataArgs train_args;
  auto* train_cmd = app.add_subcommand("gen-train-data", "Pack a corpus into FIM training samples");
  train_cmd->add_option("--corpus", train_args.corpus, "Corpus directory")->required();
  train_cmd->add_option("--context", train_args.context, "Training context size in tokens")->check(CLI::Range(16, 1 << 24));
  train_cmd->add_option("--splitting", train_args.splitting, "Packing mode")
      ->check(CLI::IsMember({"conventional", "document", "document_splitting"}));
  train_cmd->add_option("--spm-fraction", train_args.spm_fraction, "Probability of the SPM layout")
      ->check(CLI::Range(0.0, 1.0));
  train_cmd->add_flag("--spm-joint", train_args.spm_joint, "Encode prefix and middle together in SPM samples");
  train_cmd->add_option("--out", train_args.out, "Samples file (JSON lines); stdout if absent");
  train_cmd->add_option("--hist", train_args.hist, "Sample length histogram CSV");
  train_cmd->add_option("--bins", train_args.bins, "Histogram bins")->check(CLI::Range(2, 100000));

  DiffArgs diff_args;
  auto* diff_cmd = app.add_subcommand("diff", "Semantic diff of two definitions");
  diff_cmd->add_option("original", diff_args.original, "Original definition")->required();
  diff_cmd->add_option("candidate", diff_args.candidate, "Candidate definition")->required();
  diff_cmd->add_flag("--resolve-refs", diff_args.resolve, "Inline local $ref targets before comparing");

  RunArgs run_args;
  auto* run_cmd = app.add_subcommand("run", "Run the completion benchmark");
  run_cmd->add_option("--cases", run_args.cases, "Case file")->required();
  add_prompt_options(run_cmd, run_args.prompt);
  run_cmd->add_option("--backend", run_args.backend, "Completion source")
      ->check(CLI::IsMember({"oracle", "replay", "http"}));
  run_cmd->add_option("--replay", run_args.replay, "Stored completions for the replay backend");
  run_cmd->add_option("--backend-config", run_args.backend_config, "HTTP backend JSON config");
  run_cmd->add_option("--parallel", run_args.parallel, "Concurrent backend calls")->check(CLI::PositiveNumber);
  run_cmd->add_option("--max-new-tokens", run_args.max_new_tokens, "Generation token limit")
      ->check(CLI::PositiveNumber);
  run_cmd->add_option("--line-cap", run_args.line_cap, "Generated line limit")->check(CLI::PositiveNumber);
  run_cmd->add_option("--out", run_args.out, "Report file (.md, .csv or .json); table on stdout if absent");
  run_cmd->add_option("--results", run_args.results, "Per-case results (JSON lines)");
  run_cmd->add_option("--label", run_args.label, "Row label in the report");

  ReportArgs report_args;
  auto* report_cmd = app.add_subcommand("report", "Merge JSON run reports into one table");
  report_cmd->add_option("inputs", report_args.inputs, "JSON reports written by run")->required();
  report_cmd->add_option("--format", report_args.format, "Output format when writing to stdout")
      ->check(CLI::IsMember({"table", "csv", "json"}));
  report_cmd->add_option("--out", report_args.out, "Output file; the extension picks the format");

  std::vector<const char*> argv{"oasfim"};
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e, out, err);
    return code == 0 ? ok : usage;
  }

  try {
    if (curate_cmd->parsed()) return run_curate(curate_args, g, out, err);
    if (cases_cmd->parsed()) return run_gen_cases(cases_args, g, out, err);
    if (prompt_cmd->parsed()) return run_build_prompt(prompt_args, g, out, err);
    if (train_cmd->parsed()) return run_gen_train_data(train_args, g, out, err);
    if (diff_cmd->parsed()) return run_diff(diff_args, g, out, err);
    if (run_cmd->parsed()) return run_run(run_args, g, out, err);
    if (report_cmd->parsed()) return run_report(report_args, out);
  } catch (const BackendError& e) {
    err << "error: " << e.what() << '\n';
    return backend_failure;
  } catch (const BackendTimeout& e) {
    err << "error: " << e.what() << '\n';
    return backend_failure;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return usage;
  }
  return usage;
}

}  // namespace oasfim::cli
