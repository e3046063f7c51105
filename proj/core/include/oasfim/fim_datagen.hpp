#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "oasfim/casegen.hpp"
#include "oasfim/hashing.hpp"
#include "oasfim/prompting.hpp"
#include "oasfim/tokenizer.hpp"

namespace oasfim {

enum class SplittingMode { conventional, document_splitting };

std::string_view to_string(SplittingMode mode);
SplittingMode parse_splitting_mode(std::string_view text);

struct DataGenConfig {
  std::size_t context_size = 5120;
  double jitter_low = 0.8;
  double jitter_high = 1.2;
  double spm_fraction = 0.5;
  std::uint64_t seed = 0;
  SplittingMode splitting = SplittingMode::conventional;
  /// Encode prefix + middle as one string in SPM samples instead of
  /// concatenating the two token lists.
  bool spm_joint_encoding = false;

  /// Throws std::invalid_argument unless 0 < low <= 1 <= high and
  /// 0 <= spm_fraction <= 1.
  void validate() const;
  /// Smallest and largest piece length in tokens.
  std::size_t min_piece() const;
  std::size_t max_piece() const;
};

struct TokenSpan {
  std::string source_path;
  std::size_t begin = 0;  // token offsets within the source document
  std::size_t end = 0;

  bool operator==(const TokenSpan&) const = default;
};

/// The part of one packed context that belongs to a single document (or
/// document piece). Never contains sentinels.
struct Chunk {
  std::vector<TokenId> tokens;
  std::vector<TokenSpan> origin;
  std::size_t context_index = 0;
};

/// Piece lengths for a document of `length` tokens in document-splitting
/// mode. Lengths are drawn uniformly from [min_piece, max_piece] among the
/// values that leave a remainder which can itself be split within bounds.
/// Documents with no such partition (shorter than min_piece, or between
/// max_piece and 2 * min_piece) yield a tail piece below min_piece.
std::vector<std::size_t> split_document(std::size_t length, const DataGenConfig& config, DeterministicRng& rng);

/// True when `length` can be written as a sum of piece lengths within
/// [min_piece, max_piece].
bool splittable(std::size_t length, std::size_t min_piece, std::size_t max_piece);

/// Packing order: whole documents, or shuffled document pieces in
/// document-splitting mode. token_counts[i] is the encoded length of
/// corpus[i].
std::vector<TokenSpan> packing_units(std::span<const CorpusEntry> corpus, std::span<const std::size_t> token_counts,
                                     const DataGenConfig& config);

/// Context-level packing. Units (whole documents, or shuffled pieces in
/// document-splitting mode) are joined with one EOT token between them and
/// cut into consecutive contexts of context_size tokens. Each context is
/// then split at EOT boundaries into chunks.
std::vector<Chunk> pack_contexts(std::span<const CorpusEntry> corpus, const DataGenConfig& config,
                                 const Tokenizer& tokenizer);

struct SplitLengths {
  std::size_t prefix = 0;  // in characters
  std::size_t middle = 0;
  std::size_t suffix = 0;

  bool operator==(const SplitLengths&) const = default;
};

struct TrainingSample {
  std::vector<TokenId> tokens;  // sentinels included, ends with EOT
  FimFormat format = FimFormat::psm;
  SplitLengths split;
  std::size_t prefix_token_count = 0;
  std::size_t middle_token_count = 0;
  std::size_t suffix_token_count = 0;
  bool joint_prefix_middle = false;
  std::size_t chunk_index = 0;
};

/// Character boundaries of a byte string: offsets of UTF-8 scalar starts
/// plus the end. Bytes that are not part of a valid sequence count as one
/// character each.
std::vector<std::size_t> char_boundaries(std::string_view text);

/// Splits a chunk at two uniformly drawn character positions and lays the
/// parts out as PSM or SPM followed by EOT. Suffix and middle are encoded
/// without a leading space.
TrainingSample fim_transform(const Chunk& chunk, const DataGenConfig& config, DeterministicRng& rng,
                             const Tokenizer& tokenizer);

/// Same, with explicit character split positions (first <= second).
TrainingSample fim_assemble(const Chunk& chunk, std::size_t first, std::size_t second, FimFormat format,
                            const DataGenConfig& config, const Tokenizer& tokenizer);

struct SampleParts {
  std::string prefix;
  std::string middle;
  std::string suffix;
};

SampleParts decode_sample(const TrainingSample& sample, const Tokenizer& tokenizer);

/// pack_contexts followed by fim_transform per chunk with a per-chunk seed.
std::vector<TrainingSample> generate_training_data(std::span<const CorpusEntry> corpus, const DataGenConfig& config,
                                                   const Tokenizer& tokenizer);

struct Histogram {
  double lo = 0.0;
  double hi = 1.0;
  std::vector<std::size_t> counts;

  double bin_width() const { return (hi - lo) / static_cast<double>(counts.size()); }
  std::size_t total() const;
  /// Index of the bin holding `value` (values at hi land in the last bin).
  std::size_t bin_of(double value) const;
};

/// Counts sample token lengths in `bins` equal bins over [lo, hi].
Histogram length_histogram(std::span<const TrainingSample> samples, std::size_t bins, double lo, double hi);
/// Range [0, max length]; an empty input gives all-zero counts over [0, 1].
Histogram length_histogram(std::span<const TrainingSample> samples, std::size_t bins);

/// "bin_start,bin_end,count" rows with a header.
std::string histogram_csv(const Histogram& histogram);

/// One JSON object per line: {"tokens": [...], "format": "psm", ...},
/// preceded by {"type": "header", "config": ...} when a config is given.
void write_samples_jsonl(std::ostream& out, std::span<const TrainingSample> samples,
                         const nlohmann::ordered_json& config = nullptr);

}  // namespace oasfim
