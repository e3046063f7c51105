#include "oasfim/casegen.hpp"

#include <algorithm>
#include <fstream>
#include <istream>
#include <iterator>
#include <ostream>
#include <set>

#include <nlohmann/json.hpp>

#include "oasfim/error.hpp"
#include "oasfim/hashing.hpp"

namespace oasfim {

namespace {

// Byte offsets where each line starts; a final entry marks the end of text.
std::vector<std::size_t> line_starts(std::string_view text) {
  std::vector<std::size_t> starts = {0};
  for (std::size_t i = 0; i < text.size(); ++i) {
    if (text[i] == '\n') starts.push_back(i + 1);
  }
  if (starts.back() != text.size()) starts.push_back(text.size());
  return starts;
}

bool is_continuation_byte(char c) { return (static_cast<unsigned char>(c) & 0xC0) == 0x80; }

}  // namespace

const TestCase* CaseSet::find(std::string_view id) const {
  for (const auto& c : cases) {
    if (c.id == id) return &c;
  }
  return nullptr;
}

Split split_at(std::string_view text, std::size_t line, std::size_t col, std::size_t mask_lines) {
  auto starts = line_starts(text);
  // starts has line_count + 1 entries.
  const std::size_t line_count = starts.size() - 1;
  if (mask_lines == 0) throw OutOfRange("mask_lines must be at least 1");
  if (line < 1 || line + mask_lines > line_count) {
    throw OutOfRange("split line " + std::to_string(line) + " with " + std::to_string(mask_lines) +
                     " masked lines does not fit a document of " + std::to_string(line_count) + " lines");
  }
  std::size_t line_begin = starts[line - 1];
  std::size_t line_end = starts[line] - 1;  // index of the '\n'
  if (col > line_end - line_begin) {
    throw OutOfRange("split column " + std::to_string(col) + " beyond line length " +
                     std::to_string(line_end - line_begin));
  }
  std::size_t cut = line_begin + col;
  std::size_t mask_end = starts[line + mask_lines - 1];
  return {std::string(text.substr(0, cut)), std::string(text.substr(cut, mask_end - cut)),
          std::string(text.substr(mask_end))};
}

std::string case_id(std::string_view source_sha256, std::size_t line, std::size_t col, std::size_t mask_lines) {
  std::string key(source_sha256);
  key += ':' + std::to_string(line) + ':' + std::to_string(col) + ':' + std::to_string(mask_lines);
  return sha256_hex(key).substr(0, 16);
}

CaseSet generate_cases(std::span<const CorpusEntry> corpus, std::size_t per_doc, std::uint64_t seed,
                       std::size_t mask_lines) {
  CaseSet set;
  set.seed = seed;
  set.per_doc = per_doc;
  set.mask_lines = mask_lines;
  const std::string seed_text = std::to_string(seed);
  for (const auto& doc : corpus) {
    std::string doc_hash = sha256_hex(doc.text);
    set.corpus_manifest.push_back({doc.path, doc_hash});
    if (per_doc == 0) continue;

    auto starts = line_starts(doc.text);
    const std::size_t line_count = starts.size() - 1;
    if (line_count < mask_lines + 1) {
      throw OutOfRange(doc.path + " has " + std::to_string(line_count) + " lines; at least " +
                       std::to_string(mask_lines + 1) + " are needed");
    }
    // Candidate columns per valid line, flattened into one index space.
    std::vector<std::vector<std::size_t>> columns(line_count - mask_lines);
    std::size_t total = 0;
    for (std::size_t l = 0; l < columns.size(); ++l) {
      std::size_t begin = starts[l];
      std::size_t end = starts[l + 1] - 1;
      for (std::size_t c = 0; c <= end - begin; ++c) {
        if (begin + c < end && is_continuation_byte(doc.text[begin + c])) continue;
        columns[l].push_back(c);
      }
      total += columns[l].size();
    }
    if (per_doc > total) {
      throw OutOfRange(doc.path + " has only " + std::to_string(total) + " split positions");
    }
    std::set<std::pair<std::size_t, std::size_t>> used;
    for (std::size_t k = 0; k < per_doc; ++k) {
      DeterministicRng rng(derive_seed({"casegen", seed_text, doc_hash, std::to_string(k)}));
      std::pair<std::size_t, std::size_t> pos;
      do {
        auto index = rng.below(total);
        std::size_t l = 0;
        while (index >= columns[l].size()) {
          index -= columns[l].size();
          ++l;
        }
        pos = {l + 1, columns[l][index]};
      } while (used.count(pos));
      used.insert(pos);
      auto split = split_at(doc.text, pos.first, pos.second, mask_lines);
      set.cases.push_back({case_id(doc_hash, pos.first, pos.second, mask_lines), doc.path, pos.first,
                           pos.second, std::move(split.prefix), std::move(split.middle),
                           std::move(split.suffix), mask_lines});
    }
  }
  return set;
}

std::string reassemble(const TestCase& test_case, std::string_view completion) {
  std::string out;
  out.reserve(test_case.prefix.size() + completion.size() + test_case.suffix.size());
  out += test_case.prefix;
  out += completion;
  out += test_case.suffix;
  return out;
}

std::vector<CorpusEntry> load_corpus(const std::filesystem::path& dir) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(dir)) throw Error("corpus directory not found: " + dir.string());
  std::vector<fs::path> files;
  for (const auto& e : fs::recursive_directory_iterator(dir)) {
    if (!e.is_regular_file()) continue;
    auto ext = e.path().extension().string();
    if (ext == ".yaml" || ext == ".yml" || ext == ".json") files.push_back(e.path());
  }
  std::vector<CorpusEntry> out;
  out.reserve(files.size());
  for (const auto& f : files) {
    std::ifstream in(f, std::ios::binary);
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    out.push_back({fs::relative(f, dir).generic_string(), std::move(text)});
  }
  std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.path < b.path; });
  return out;
}

void write_case_set(std::ostream& out, const CaseSet& cases) {
  nlohmann::ordered_json header;
  header["type"] = "header";
  header["seed"] = cases.seed;
  header["per_doc"] = cases.per_doc;
  header["mask_lines"] = cases.mask_lines;
  header["corpus_manifest"] = nlohmann::ordered_json::array();
  for (const auto& m : cases.corpus_manifest) {
    header["corpus_manifest"].push_back({{"path", m.path}, {"sha256", m.sha256}});
  }
  out << header.dump() << '\n';
  for (const auto& c : cases.cases) {
    nlohmann::ordered_json j;
    j["id"] = c.id;
    j["source_path"] = c.source_path;
    j["split_line"] = c.split_line;
    j["split_col"] = c.split_col;
    j["prefix"] = c.prefix;
    j["middle"] = c.middle;
    j["suffix"] = c.suffix;
    j["mask_line_count"] = c.mask_line_count;
    out << j.dump() << '\n';
  }
}

CaseSet read_case_set(std::istream& in) {
  CaseSet set;
  std::string line;
  bool have_header = false;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw ParseError(e.what(), line_no, 1);
    }
    try {
      if (!have_header) {
        if (j.value("type", std::string()) != "header") throw ParseError("missing case set header", line_no, 1);
        set.seed = j.at("seed").get<std::uint64_t>();
        set.per_doc = j.value("per_doc", std::size_t{0});
        set.mask_lines = j.value("mask_lines", kDefaultMaskLines);
        for (const auto& m : j.at("corpus_manifest")) {
          set.corpus_manifest.push_back({m.at("path").get<std::string>(), m.at("sha256").get<std::string>()});
        }
        have_header = true;
        continue;
      }
      set.cases.push_back({j.at("id").get<std::string>(), j.at("source_path").get<std::string>(),
                           j.at("split_line").get<std::size_t>(), j.at("split_col").get<std::size_t>(),
                           j.at("prefix").get<std::string>(), j.at("middle").get<std::string>(),
                           j.at("suffix").get<std::string>(), j.at("mask_line_count").get<std::size_t>()});
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(e.what(), line_no, 1);
    }
  }
  if (!have_header) throw ParseError("empty case set file", 1, 1);
  return set;
}

CaseSet read_case_set(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open case file " + path.string());
  return read_case_set(in);
}

}  // namespace oasfim
