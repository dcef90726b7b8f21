#pragma once

// Counter-based randomness.
//
// Every random number in the simulator is a pure function of
//   (master_seed, substream, task, round)
// so draws never depend on execution order, thread scheduling, or on how many
// other draws happened before. The mixer is the SplitMix64 finalizer applied
// in a chain over the key words:
//
//   h0 = seed
//   h_{i+1} = splitmix64(h_i ^ (w_i + 0x9E3779B97F4A7C15 * (i + 1)))
//
// and a uniform double in [0,1) is formed from the top 53 bits of the result.

#include <cstdint>
#include <initializer_list>

namespace budget_bandit {

inline constexpr std::uint64_t splitmix64(std::uint64_t z) noexcept {
  z += 0x9E3779B97F4A7C15ULL;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

inline constexpr std::uint64_t mix_words(std::uint64_t seed,
                                         std::initializer_list<std::uint64_t> words) noexcept {
  std::uint64_t h = seed;
  std::uint64_t i = 1;
  for (std::uint64_t w : words) {
    h = splitmix64(h ^ (w + 0x9E3779B97F4A7C15ULL * i));
    ++i;
  }
  return h;
}

inline constexpr double to_unit_interval(std::uint64_t bits) noexcept {
  return static_cast<double>(bits >> 11) * 0x1.0p-53;
}

// Seed of replication `index` under `master`.
inline constexpr std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index) noexcept {
  return mix_words(master, {0x5EEDULL, index});
}

enum class Substream : std::uint64_t {
  Completions = 1,
  Rewards = 2,
  Algorithm = 3,
  Instance = 4,
};

// Draws for one simulation round. Copyable and stateless apart from its key.
class CounterRng {
 public:
  constexpr CounterRng(std::uint64_t seed, std::uint64_t round) noexcept
      : seed_(seed), round_(round) {}

  constexpr std::uint64_t seed() const noexcept { return seed_; }
  constexpr std::uint64_t round() const noexcept { return round_; }

  constexpr std::uint64_t bits(Substream stream, std::uint64_t task) const noexcept {
    return mix_words(seed_, {static_cast<std::uint64_t>(stream), task, round_});
  }

  constexpr double uniform(Substream stream, std::uint64_t task) const noexcept {
    return to_unit_interval(bits(stream, task));
  }

 private:
  std::uint64_t seed_;
  std::uint64_t round_;
};

}  // namespace budget_bandit
