#pragma once

#include <cstdint>
#include <span>
#include <utility>

namespace provega {

// SplitMix64. This exact sequence is part of the chunk-plan contract: random
// plans must reproduce byte-for-byte across runs, platforms and languages.
class SplitMix64 {
 public:
  explicit constexpr SplitMix64(std::uint64_t seed) noexcept : state_(seed) {}

  constexpr std::uint64_t next() noexcept {
    std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

 private:
  std::uint64_t state_;
};

// Fisher-Yates from the back: for i = n-1 .. 1, swap(i, next() % (i + 1)).
// The modulo reduction is normative; do not swap in a "better" bounded draw.
template <class T>
constexpr void shuffle(std::span<T> items, SplitMix64& rng) noexcept {
  for (std::size_t i = items.size(); i > 1; --i) {
    const std::size_t hi = i - 1;
    const auto j = static_cast<std::size_t>(rng.next() % static_cast<std::uint64_t>(i));
    std::swap(items[hi], items[j]);
  }
}

}  // namespace provega
