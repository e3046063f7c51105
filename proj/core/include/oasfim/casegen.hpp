#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace oasfim {

inline constexpr std::size_t kDefaultMaskLines = 10;

/// A masked completion task. prefix + middle + suffix is the source text.
struct TestCase {
  std::string id;
  std::string source_path;
  std::size_t split_line = 1;  // 1-based
  std::size_t split_col = 0;   // byte offset within the line
  std::string prefix;
  std::string middle;
  std::string suffix;
  std::size_t mask_line_count = kDefaultMaskLines;

  std::string source_text() const { return prefix + middle + suffix; }
  bool operator==(const TestCase&) const = default;
};

struct ManifestEntry {
  std::string path;
  std::string sha256;

  bool operator==(const ManifestEntry&) const = default;
};

struct CaseSet {
  std::vector<TestCase> cases;
  std::uint64_t seed = 0;
  std::size_t per_doc = 0;
  std::size_t mask_lines = kDefaultMaskLines;
  std::vector<ManifestEntry> corpus_manifest;

  const TestCase* find(std::string_view id) const;
  bool operator==(const CaseSet&) const = default;
};

/// A source document for case generation: its path label and raw text.
struct CorpusEntry {
  std::string path;
  std::string text;
};

struct Split {
  std::string prefix;
  std::string middle;
  std::string suffix;
};

/// Cuts at (line, col) and masks the rest of that line plus the following
/// mask_lines - 1 lines, so the middle holds exactly mask_lines newlines.
/// Requires 1 <= line <= line_count - mask_lines and col <= line length;
/// throws OutOfRange otherwise.
Split split_at(std::string_view text, std::size_t line, std::size_t col, std::size_t mask_lines = kDefaultMaskLines);

/// Stable id: the first 16 hex digits of SHA-256 over the source hash and
/// split parameters.
std::string case_id(std::string_view source_sha256, std::size_t line, std::size_t col, std::size_t mask_lines);

/// per_doc distinct split positions per document, drawn uniformly over
/// valid (line, col) pairs. Column candidates are byte offsets that do not
/// fall inside a UTF-8 sequence. Each document draws from its own stream
/// seeded by (seed, document hash, case index).
CaseSet generate_cases(std::span<const CorpusEntry> corpus, std::size_t per_doc, std::uint64_t seed,
                       std::size_t mask_lines = kDefaultMaskLines);

std::string reassemble(const TestCase& test_case, std::string_view completion);

/// Loads *.yaml, *.yml and *.json under dir (recursive) sorted by relative path.
std::vector<CorpusEntry> load_corpus(const std::filesystem::path& dir);

/// JSON-lines: a header line with seed, per_doc, mask_lines and the corpus
/// manifest, then one TestCase per line.
void write_case_set(std::ostream& out, const CaseSet& cases);
CaseSet read_case_set(std::istream& in);
CaseSet read_case_set(const std::filesystem::path& path);

}  // namespace oasfim
