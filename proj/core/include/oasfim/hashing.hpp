#pragma once

#include <array>
#include <cstdint>
#include <initializer_list>
#include <random>
#include <string>
#include <string_view>

namespace oasfim {

using Sha256Digest = std::array<std::uint8_t, 32>;

Sha256Digest sha256(std::string_view data);
std::string sha256_hex(std::string_view data);
std::string to_hex(const Sha256Digest& digest);

/// Derives a 64-bit seed from a list of parts. Parts are length-prefixed
/// before hashing, so ("ab", "c") and ("a", "bc") give different seeds.
std::uint64_t derive_seed(std::initializer_list<std::string_view> parts);

/// Seeded generator whose draws are identical on every platform.
///
/// std::uniform_int_distribution is implementation-defined, so bounded
/// draws are done here with rejection sampling on top of mt19937_64.
class DeterministicRng {
 public:
  explicit DeterministicRng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }

  /// Uniform integer in [0, bound). bound must be > 0.
  std::uint64_t below(std::uint64_t bound);

  /// Uniform integer in [lo, hi] (inclusive).
  std::int64_t between(std::int64_t lo, std::int64_t hi);

  /// Uniform real in [0, 1) with 53 bits of precision.
  double unit();

  bool bernoulli(double p) { return unit() < p; }

  template <typename It>
  void shuffle(It first, It last) {
    auto n = static_cast<std::uint64_t>(last - first);
    for (std::uint64_t i = n; i > 1; --i) {
      auto j = below(i);
      std::iter_swap(first + (i - 1), first + j);
    }
  }

 private:
  std::mt19937_64 engine_;
};

}  // namespace oasfim
