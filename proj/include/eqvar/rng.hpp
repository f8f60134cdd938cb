#pragma once

// Counter-based random numbers built on the SplitMix64 finalizer
// (Steele, Lea & Flood 2014). A stream is identified by a 64-bit key; the
// k-th draw of a stream is mix(key + (k + 1) * golden), so any draw can be
// computed independently of the others and the output is identical on every
// platform. Keys for substreams are derived by hashing (parent key, label).

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <numbers>

namespace eqvar {

inline constexpr std::uint64_t kGoldenGamma = 0x9E3779B97F4A7C15ULL;

constexpr std::uint64_t splitmix64_mix(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

/// Order-sensitive hash of a key and a list of labels.
constexpr std::uint64_t derive_key(std::uint64_t key, std::initializer_list<std::uint64_t> labels) {
  std::uint64_t h = splitmix64_mix(key ^ 0x6A09E667F3BCC909ULL);
  for (std::uint64_t label : labels) h = splitmix64_mix(h + kGoldenGamma + splitmix64_mix(label));
  return h;
}

class CounterStream {
 public:
  explicit constexpr CounterStream(std::uint64_t key) : key_(key) {}

  constexpr std::uint64_t bits(std::uint64_t counter) const {
    return splitmix64_mix(key_ + (counter + 1) * kGoldenGamma);
  }

  /// Uniform on the open interval (0, 1), 53 bits of resolution.
  double uniform(std::uint64_t counter) const {
    return (static_cast<double>(bits(counter) >> 11) + 0.5) * 0x1.0p-53;
  }

  /// Standard normal via Box-Muller on draws 2c and 2c+1.
  double normal(std::uint64_t counter) const {
    const double u1 = uniform(2 * counter);
    const double u2 = uniform(2 * counter + 1);
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }

  std::uint64_t key() const { return key_; }

 private:
  std::uint64_t key_;
};

/// Sequential convenience wrapper over a CounterStream.
class SequentialRng {
 public:
  explicit SequentialRng(std::uint64_t key) : stream_(key) {}

  double uniform() { return stream_.uniform(next_++); }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  bool coin() { return (stream_.bits(next_++) >> 63) != 0; }
  /// Uniform integer in [0, bound).
  std::uint64_t below(std::uint64_t bound) {
    return static_cast<std::uint64_t>(uniform() * static_cast<double>(bound)) % bound;
  }

 private:
  CounterStream stream_;
  std::uint64_t next_ = 0;
};

}  // namespace eqvar
