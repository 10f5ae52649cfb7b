#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <utility>

namespace eegsrc {

/// Seedable random source whose output is identical on every conforming
/// C++ standard library.
///
/// The engine is std::mt19937_64 (its sequence is fixed by the standard),
/// seeded from a SplitMix64 scramble of the user seed. The standard
/// distributions are implementation-defined, so they are not used:
///   - uniform():  top 53 bits of one engine draw, scaled into [0, 1)
///   - normal():   Box-Muller on two uniforms, the second variate is cached
///   - below(n):   rejection sampling on the raw 64-bit draw
///   - shuffle():  Fisher-Yates from the back using below()
class Rng {
 public:
  explicit Rng(std::uint64_t seed);

  /// Independent stream for (seed, stream_id), e.g. one per epoch or fold.
  static Rng stream(std::uint64_t seed, std::uint64_t stream_id);

  std::uint64_t next_u64() { return engine_(); }
  double uniform();
  double normal();
  std::size_t below(std::size_t n);

  template <class RandomIt>
  void shuffle(RandomIt first, RandomIt last) {
    const auto n = static_cast<std::size_t>(last - first);
    for (std::size_t i = n; i > 1; --i) {
      const std::size_t j = below(i);
      using std::swap;
      swap(first[i - 1], first[j]);
    }
  }

 private:
  std::mt19937_64 engine_;
  double spare_normal_ = 0.0;
  bool has_spare_ = false;
};

std::uint64_t splitmix64(std::uint64_t x);

}  // namespace eegsrc
