#ifndef HARMONIC_RNG_HPP
#define HARMONIC_RNG_HPP

#include <cstdint>
#include <limits>

namespace harmonic {

/// Counter-based random stream keyed by (seed, stream, substream).
///
/// Each draw hashes key + counter, so streams for different (state, path)
/// pairs are independent of evaluation order and thread partitioning.
class StreamRng {
 public:
  using result_type = std::uint64_t;

  StreamRng(std::uint64_t seed, std::uint64_t stream, std::uint64_t substream = 0)
      : key_(mix(mix(seed ^ 0x243F6A8885A308D3ULL) ^ mix(stream + 0x13198A2E03707344ULL) ^
                 mix(substream + 0xA4093822299F31D0ULL))) {}

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

  result_type operator()() { return mix(key_ + (++counter_) * 0x9E3779B97F4A7C15ULL); }

  /// Uniform on [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>((*this)() >> 11) * 0x1.0p-53; }

 private:
  // splitmix64 finalizer
  static std::uint64_t mix(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

}  // namespace harmonic

#endif  // HARMONIC_RNG_HPP
