#include <benchmark/benchmark.h>

#include <filesystem>

#include "oasfim/casegen.hpp"
#include "oasfim/fim_datagen.hpp"
#include "oasfim/prompting.hpp"
#include "oasfim/semantic_diff.hpp"
#include "oasfim/tokenizer.hpp"

namespace {

using namespace oasfim;

const std::vector<CorpusEntry>& corpus() {
  static const auto c = load_corpus(std::filesystem::path(OASFIM_BENCH_DATA_DIR) / "mini_corpus");
  return c;
}

std::string joined_corpus() {
  std::string all;
  for (const auto& e : corpus()) all += e.text;
  return all;
}

void BM_ParseAndDiff(benchmark::State& state) {
  const auto& text = corpus()[3].text;
  auto original = resolve_refs(parse_definition(text));
  std::string edited = text;
  edited.replace(edited.find("title:"), 6, "title: x");
  for (auto _ : state) {
    auto candidate = resolve_refs(parse_definition(edited));
    benchmark::DoNotOptimize(diff(original, candidate));
  }
}
BENCHMARK(BM_ParseAndDiff);

void BM_DiffTreesOnly(benchmark::State& state) {
  auto a = resolve_refs(parse_definition(corpus()[3].text));
  auto b = resolve_refs(parse_definition(corpus()[3].text));
  for (auto _ : state) benchmark::DoNotOptimize(diff(a, b));
}
BENCHMARK(BM_DiffTreesOnly);

void BM_EncodeBytes(benchmark::State& state) {
  ByteTokenizer tok;
  auto text = joined_corpus();
  for (auto _ : state) benchmark::DoNotOptimize(tok.encode(text));
  state.SetBytesProcessed(static_cast<std::int64_t>(state.iterations() * text.size()));
}
BENCHMARK(BM_EncodeBytes);

void BM_EncodeSubword(benchmark::State& state) {
  auto tok = SubwordTokenizer::load(std::filesystem::path(OASFIM_BENCH_DATA_DIR) / "test_vocab.json");
  auto text = joined_corpus();
  for (auto _ : state) benchmark::DoNotOptimize(tok->encode(text));
  state.SetBytesProcessed(static_cast<std::int64_t>(state.iterations() * text.size()));
}
BENCHMARK(BM_EncodeSubword);

void BM_BuildPrompt(benchmark::State& state) {
  ByteTokenizer tok;
  auto cases = generate_cases(corpus(), 2, 1);
  PromptConfig cfg;
  cfg.context_size = static_cast<std::size_t>(state.range(0));
  std::size_t i = 0;
  for (auto _ : state) {
    const auto& c = cases.cases[i++ % cases.cases.size()];
    benchmark::DoNotOptimize(build_prompt(c.prefix, c.suffix, cfg, tok));
  }
}
BENCHMARK(BM_BuildPrompt)->Arg(1024)->Arg(4096);

void BM_GenerateTrainingData(benchmark::State& state) {
  ByteTokenizer tok;
  DataGenConfig cfg;
  cfg.context_size = 512;
  cfg.splitting = state.range(0) != 0 ? SplittingMode::document_splitting : SplittingMode::conventional;
  for (auto _ : state) benchmark::DoNotOptimize(generate_training_data(corpus(), cfg, tok));
}
BENCHMARK(BM_GenerateTrainingData)->Arg(0)->Arg(1);

}  // namespace

BENCHMARK_MAIN();
