#include "oasfim/fim_datagen.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

namespace oasfim {

std::string_view to_string(SplittingMode mode) {
  return mode == SplittingMode::conventional ? "conventional" : "document";
}

SplittingMode parse_splitting_mode(std::string_view text) {
  if (text == "conventional") return SplittingMode::conventional;
  if (text == "document" || text == "document_splitting") return SplittingMode::document_splitting;
  throw std::invalid_argument("unknown splitting mode '" + std::string(text) + "'");
}

void DataGenConfig::validate() const {
  if (context_size == 0) throw std::invalid_argument("context_size must be positive");
  if (!(jitter_low > 0.0 && jitter_low <= 1.0 && jitter_high >= 1.0)) {
    throw std::invalid_argument("jitter must satisfy 0 < low <= 1 <= high");
  }
  if (!(spm_fraction >= 0.0 && spm_fraction <= 1.0)) {
    throw std::invalid_argument("spm_fraction must lie in [0, 1]");
  }
}

std::size_t DataGenConfig::min_piece() const {
  return static_cast<std::size_t>(std::ceil(jitter_low * static_cast<double>(context_size) - 1e-9));
}

std::size_t DataGenConfig::max_piece() const {
  return static_cast<std::size_t>(std::floor(jitter_high * static_cast<double>(context_size) + 1e-9));
}

bool splittable(std::size_t length, std::size_t min_piece, std::size_t max_piece) {
  if (length == 0) return true;
  if (min_piece == 0 || max_piece < min_piece) return false;
  // Some k with k * min <= length <= k * max.
  std::size_t k_low = (length + max_piece - 1) / max_piece;
  std::size_t k_high = length / min_piece;
  return k_low <= k_high;
}

std::vector<std::size_t> split_document(std::size_t length, const DataGenConfig& config, DeterministicRng& rng) {
  const std::size_t lo = config.min_piece();
  const std::size_t hi = config.max_piece();
  std::vector<std::size_t> pieces;
  std::size_t rest = length;
  while (rest > 0) {
    if (rest <= hi) {
      pieces.push_back(rest);
      break;
    }
    // Piece lengths in [lo, hi] that keep the remainder splittable.
    std::vector<std::pair<std::size_t, std::size_t>> ranges;
    std::size_t total = 0;
    std::size_t run_start = 0;
    bool in_run = false;
    for (std::size_t len = lo; len <= hi + 1; ++len) {
      bool ok = len <= hi && splittable(rest - len, lo, hi);
      if (ok && !in_run) {
        run_start = len;
        in_run = true;
      } else if (!ok && in_run) {
        ranges.emplace_back(run_start, len - 1);
        total += len - run_start;
        in_run = false;
      }
    }
    std::size_t piece = hi;
    if (total > 0) {
      auto index = rng.below(total);
      for (const auto& [a, b] : ranges) {
        if (index <= b - a) {
          piece = a + index;
          break;
        }
        index -= b - a + 1;
      }
    }
    pieces.push_back(piece);
    rest -= piece;
  }
  return pieces;
}

namespace {

struct Unit {
  std::size_t doc;
  std::size_t begin;
  std::size_t end;
};

std::vector<Unit> plan_units(std::span<const CorpusEntry> corpus, std::span<const std::size_t> token_counts,
                             const DataGenConfig& config) {
  if (token_counts.size() != corpus.size()) throw std::invalid_argument("one token count per document expected");
  const std::string seed_text = std::to_string(config.seed);
  std::vector<Unit> units;
  for (std::size_t d = 0; d < corpus.size(); ++d) {
    const auto n = token_counts[d];
    if (n == 0) continue;
    if (config.splitting == SplittingMode::conventional) {
      units.push_back({d, 0, n});
      continue;
    }
    DeterministicRng rng(derive_seed({"split", seed_text, corpus[d].path, std::to_string(d)}));
    std::size_t pos = 0;
    for (auto len : split_document(n, config, rng)) {
      units.push_back({d, pos, pos + len});
      pos += len;
    }
  }
  if (config.splitting == SplittingMode::document_splitting) {
    DeterministicRng rng(derive_seed({"shuffle", seed_text}));
    rng.shuffle(units.begin(), units.end());
  }
  return units;
}

}  // namespace

std::vector<TokenSpan> packing_units(std::span<const CorpusEntry> corpus, std::span<const std::size_t> token_counts,
                                     const DataGenConfig& config) {
  config.validate();
  std::vector<TokenSpan> out;
  for (const auto& u : plan_units(corpus, token_counts, config)) out.push_back({corpus[u.doc].path, u.begin, u.end});
  return out;
}

std::vector<Chunk> pack_contexts(std::span<const CorpusEntry> corpus, const DataGenConfig& config,
                                 const Tokenizer& tokenizer) {
  config.validate();
  std::vector<std::vector<TokenId>> encoded;
  std::vector<std::size_t> counts;
  encoded.reserve(corpus.size());
  for (const auto& doc : corpus) {
    encoded.push_back(tokenizer.encode(doc.text));
    counts.push_back(encoded.back().size());
  }
  const auto units = plan_units(corpus, counts, config);

  // Walk the virtual stream unit0 EOT unit1 EOT ... in windows of C tokens.
  const std::size_t window = config.context_size;
  std::vector<Chunk> chunks;
  std::size_t context = 0;
  std::size_t used = 0;  // tokens consumed in the current window
  auto advance = [&](std::size_t k) {
    used += k;
    if (used == window) {
      used = 0;
      ++context;
    }
  };
  for (std::size_t u = 0; u < units.size(); ++u) {
    if (u > 0) advance(1);  // the EOT separator
    const auto& unit = units[u];
    std::size_t pos = unit.begin;
    while (pos < unit.end) {
      std::size_t take = std::min(unit.end - pos, window - used);
      Chunk c;
      c.context_index = context;
      const auto& toks = encoded[unit.doc];
      c.tokens.assign(toks.begin() + static_cast<std::ptrdiff_t>(pos),
                      toks.begin() + static_cast<std::ptrdiff_t>(pos + take));
      c.origin.push_back({corpus[unit.doc].path, pos, pos + take});
      chunks.push_back(std::move(c));
      pos += take;
      advance(take);
    }
  }
  return chunks;
}

std::vector<std::size_t> char_boundaries(std::string_view text) {
  std::vector<std::size_t> out;
  out.reserve(text.size() + 1);
  std::size_t i = 0;
  while (i < text.size()) {
    out.push_back(i);
    auto c = static_cast<unsigned char>(text[i]);
    std::size_t len = c < 0x80 ? 1 : (c >> 5) == 0x6 ? 2 : (c >> 4) == 0xE ? 3 : (c >> 3) == 0x1E ? 4 : 0;
    bool valid = len > 0 && i + len <= text.size();
    for (std::size_t k = 1; valid && k < len; ++k) {
      valid = (static_cast<unsigned char>(text[i + k]) & 0xC0) == 0x80;
    }
    i += valid ? len : 1;
  }
  out.push_back(text.size());
  return out;
}

TrainingSample fim_assemble(const Chunk& chunk, std::size_t first, std::size_t second, FimFormat format,
                            const DataGenConfig& config, const Tokenizer& tokenizer) {
  const std::string text = tokenizer.decode(chunk.tokens);
  const auto bounds = char_boundaries(text);
  const std::size_t n_chars = bounds.size() - 1;
  if (first > second || second > n_chars) throw std::out_of_range("split positions outside the chunk");
  std::string_view view(text);
  auto prefix = view.substr(0, bounds[first]);
  auto middle = view.substr(bounds[first], bounds[second] - bounds[first]);
  auto suffix = view.substr(bounds[second]);

  const EncodeOptions suppressed{.suppress_leading_space = true};
  const auto& s = tokenizer.sentinels();
  TrainingSample sample;
  sample.format = format;
  sample.split = {first, second - first, n_chars - second};
  auto enc_suffix = tokenizer.encode(suffix, suppressed);
  sample.suffix_token_count = enc_suffix.size();
  auto& t = sample.tokens;
  if (format == FimFormat::psm) {
    auto enc_prefix = tokenizer.encode(prefix);
    auto enc_middle = tokenizer.encode(middle, suppressed);
    sample.prefix_token_count = enc_prefix.size();
    sample.middle_token_count = enc_middle.size();
    t.reserve(enc_prefix.size() + enc_suffix.size() + enc_middle.size() + 4);
    t.push_back(s.pre);
    t.insert(t.end(), enc_prefix.begin(), enc_prefix.end());
    t.push_back(s.suf);
    t.insert(t.end(), enc_suffix.begin(), enc_suffix.end());
    t.push_back(s.mid);
    t.insert(t.end(), enc_middle.begin(), enc_middle.end());
  } else {
    t.push_back(s.pre);
    t.push_back(s.suf);
    t.insert(t.end(), enc_suffix.begin(), enc_suffix.end());
    t.push_back(s.mid);
    if (config.spm_joint_encoding) {
      std::string joint(prefix);
      joint.append(middle);
      auto enc = tokenizer.encode(joint);
      sample.joint_prefix_middle = true;
      sample.prefix_token_count = enc.size();
      t.insert(t.end(), enc.begin(), enc.end());
    } else {
      auto enc_prefix = tokenizer.encode(prefix);
      auto enc_middle = tokenizer.encode(middle, suppressed);
      sample.prefix_token_count = enc_prefix.size();
      sample.middle_token_count = enc_middle.size();
      t.insert(t.end(), enc_prefix.begin(), enc_prefix.end());
      t.insert(t.end(), enc_middle.begin(), enc_middle.end());
    }
  }
  t.push_back(s.eot);
  return sample;
}

TrainingSample fim_transform(const Chunk& chunk, const DataGenConfig& config, DeterministicRng& rng,
                             const Tokenizer& tokenizer) {
  const std::string text = tokenizer.decode(chunk.tokens);
  const std::size_t n_chars = char_boundaries(text).size() - 1;
  auto a = static_cast<std::size_t>(rng.below(n_chars + 1));
  auto b = static_cast<std::size_t>(rng.below(n_chars + 1));
  if (a > b) std::swap(a, b);
  FimFormat format = rng.bernoulli(config.spm_fraction) ? FimFormat::spm : FimFormat::psm;
  return fim_assemble(chunk, a, b, format, config, tokenizer);
}

SampleParts decode_sample(const TrainingSample& sample, const Tokenizer& tokenizer) {
  const EncodeOptions suppressed{.suppress_leading_space = true};
  std::span<const TokenId> t(sample.tokens);
  SampleParts parts;
  const std::size_t p = sample.prefix_token_count;
  const std::size_t m = sample.middle_token_count;
  const std::size_t s = sample.suffix_token_count;
  if (sample.format == FimFormat::psm) {
    parts.prefix = tokenizer.decode(t.subspan(1, p));
    parts.suffix = tokenizer.decode(t.subspan(2 + p, s), suppressed);
    parts.middle = tokenizer.decode(t.subspan(3 + p + s, m), suppressed);
    return parts;
  }
  parts.suffix = tokenizer.decode(t.subspan(2, s), suppressed);
  if (sample.joint_prefix_middle) {
    std::string joint = tokenizer.decode(t.subspan(3 + s, p));
    auto bounds = char_boundaries(joint);
    auto cut = bounds[std::min(sample.split.prefix, bounds.size() - 1)];
    parts.prefix = joint.substr(0, cut);
    parts.middle = joint.substr(cut);
  } else {
    parts.prefix = tokenizer.decode(t.subspan(3 + s, p));
    parts.middle = tokenizer.decode(t.subspan(3 + s + p, m), suppressed);
  }
  return parts;
}

std::vector<TrainingSample> generate_training_data(std::span<const CorpusEntry> corpus, const DataGenConfig& config,
                                                   const Tokenizer& tokenizer) {
  auto chunks = pack_contexts(corpus, config, tokenizer);
  std::vector<TrainingSample> samples;
  samples.reserve(chunks.size());
  const std::string seed_text = std::to_string(config.seed);
  for (std::size_t i = 0; i < chunks.size(); ++i) {
    DeterministicRng rng(derive_seed({"fim", seed_text, std::to_string(i)}));
    auto sample = fim_transform(chunks[i], config, rng, tokenizer);
    sample.chunk_index = i;
    samples.push_back(std::move(sample));
  }
  return samples;
}

std::size_t Histogram::total() const {
  std::size_t n = 0;
  for (auto c : counts) n += c;
  return n;
}

std::size_t Histogram::bin_of(double value) const {
  if (counts.empty()) return 0;
  if (value <= lo) return 0;
  auto idx = static_cast<std::size_t>((value - lo) / bin_width());
  return std::min(idx, counts.size() - 1);
}

Histogram length_histogram(std::span<const TrainingSample> samples, std::size_t bins, double lo, double hi) {
  if (bins < 2) throw std::invalid_argument("a histogram needs at least 2 bins");
  if (!(hi > lo)) throw std::invalid_argument("histogram range is empty");
  Histogram h{lo, hi, std::vector<std::size_t>(bins, 0)};
  for (const auto& s : samples) {
    auto len = static_cast<double>(s.tokens.size());
    if (len < lo || len > hi) continue;
    ++h.counts[h.bin_of(len)];
  }
  return h;
}

Histogram length_histogram(std::span<const TrainingSample> samples, std::size_t bins) {
  std::size_t max_len = 0;
  for (const auto& s : samples) max_len = std::max(max_len, s.tokens.size());
  return length_histogram(samples, bins, 0.0, max_len == 0 ? 1.0 : static_cast<double>(max_len));
}

std::string histogram_csv(const Histogram& histogram) {
  std::ostringstream os;
  os << "bin_start,bin_end,count\n";
  const double w = histogram.bin_width();
  for (std::size_t i = 0; i < histogram.counts.size(); ++i) {
    os << histogram.lo + w * static_cast<double>(i) << ',' << histogram.lo + w * static_cast<double>(i + 1) << ','
       << histogram.counts[i] << '\n';
  }
  return os.str();
}

void write_samples_jsonl(std::ostream& out, std::span<const TrainingSample> samples,
                         const nlohmann::ordered_json& config) {
  if (!config.is_null()) {
    nlohmann::ordered_json h;
    h["type"] = "header";
    h["config"] = config;
    out << h.dump() << '\n';
  }
  for (const auto& s : samples) {
    nlohmann::ordered_json j;
    j["tokens"] = s.tokens;
    j["format"] = to_string(s.format);
    j["chunk_index"] = s.chunk_index;
    j["split"] = {s.split.prefix, s.split.middle, s.split.suffix};
    out << j.dump() << '\n';
  }
}

}  // namespace oasfim
