#pragma once

#include <cstddef>
#include <cstdint>

namespace gradorth {

// splitmix64 output finalizer.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

inline constexpr std::uint64_t kGoldenGamma = 0x9E3779B97F4A7C15ULL;

// Counter-based 64-bit generator. The whole algorithm is pinned so that any
// port produces identical streams:
//
//   key(seed, stream) = mix64(seed + kGoldenGamma * (stream + 1))
//   word(i)           = mix64(key + kGoldenGamma * (i + 1))        i = 0, 1, 2, ...
//   uniform()         = (word >> 11) * 2^-53                        in [0, 1)
//   uniform_index(n)  = high 64 bits of word * n                    in [0, n)
//   normal()          = Box-Muller on (u1 = 1 - uniform(), u2 = uniform()):
//                       returns r cos(2 pi u2), caches r sin(2 pi u2) for the next call
//
// With stream = 0 the words are exactly the splitmix64 sequence seeded at mix64(seed + gamma).
class CounterRng {
 public:
  explicit CounterRng(std::uint64_t seed, std::uint64_t stream = 0) noexcept
      : key_(mix64(seed + kGoldenGamma * (stream + 1))) {}

  // Word at absolute position `index`, independent of generator state.
  std::uint64_t word_at(std::uint64_t index) const noexcept {
    return mix64(key_ + kGoldenGamma * (index + 1));
  }

  std::uint64_t next_u64() noexcept { return word_at(counter_++); }
  double uniform() noexcept;
  std::size_t uniform_index(std::size_t n) noexcept;
  double normal() noexcept;

  std::uint64_t counter() const noexcept { return counter_; }

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace gradorth
