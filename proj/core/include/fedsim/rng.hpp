#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <vector>

namespace fedsim {

// Every random decision in a run is drawn from its own substream, derived from
// the master seed, a stream tag, and up to two integer coordinates (client id,
// round index, ...). Substreams make results independent of the order in which
// components consume randomness, which is what keeps whole runs replayable.
enum class StreamTag : std::uint64_t {
  kDataMeans = 1,
  kDataSamples,
  kDataSkew,
  kInitModel,
  kDelayAssign,
  kRoundDelay,
  kDropoutPick,
  kDropoutTime,
  kSelect,
  kTrain,
  kTierPick,
  kProfile,
  kBench,
};

constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

constexpr std::uint64_t subseed(std::uint64_t seed, StreamTag tag, std::uint64_t a = 0,
                                std::uint64_t b = 0) {
  std::uint64_t s = splitmix64(seed ^ static_cast<std::uint64_t>(tag) * 0x9e3779b97f4a7c15ULL);
  s = splitmix64(s ^ a);
  return splitmix64(s ^ b);
}

/// Deterministic RNG: a std::mt19937_64 engine (bit-exact per the standard)
/// with hand-rolled distributions, so streams reproduce across platforms and
/// standard-library versions.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  /// Uniform in [0, 1) with 53 bits of precision.
  double uniform01() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

  /// Uniform integer in [0, n); n > 0.
  std::uint64_t below(std::uint64_t n) {
    return static_cast<std::uint64_t>(
        (static_cast<unsigned __int128>(next_u64()) * n) >> 64);
  }

  /// Standard normal via Box-Muller (no cached second value).
  double normal() {
    double u1 = uniform01();
    while (u1 <= 0.0) u1 = uniform01();
    const double u2 = uniform01();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }

 private:
  std::mt19937_64 engine_;
};

/// In-place Fisher-Yates shuffle.
template <typename T>
void shuffle(std::vector<T>& items, Rng& rng) {
  for (std::size_t i = items.size(); i > 1; --i) {
    const std::size_t j = static_cast<std::size_t>(rng.below(i));
    std::swap(items[i - 1], items[j]);
  }
}

/// Draws k distinct elements from pool (k <= pool.size()), returned in
/// ascending order so downstream iteration is independent of draw order.
std::vector<int> sample_without_replacement(const std::vector<int>& pool, std::size_t k, Rng& rng);

}  // namespace fedsim
