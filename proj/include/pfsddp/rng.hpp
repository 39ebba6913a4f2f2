#pragma once

#include <cstdint>

namespace pfsddp {

/// SplitMix64 (Steele, Lea, Flood 2014). Streams are derived per
/// (seed, iteration, path) so sampling does not depend on thread scheduling.
class SplitMix64 {
 public:
  explicit SplitMix64(std::uint64_t seed) : state_(seed) {}
  std::uint64_t next() {
    std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }
  /// Uniform on [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  static SplitMix64 stream(std::uint64_t seed, std::uint64_t iteration, std::uint64_t path) {
    SplitMix64 a(seed);
    SplitMix64 b(a.next() ^ (iteration * 0xd1b54a32d192ed03ULL));
    return SplitMix64(b.next() ^ (path * 0x8cb92ba72f3d8dd7ULL));
  }

 private:
  std::uint64_t state_;
};

}  // namespace pfsddp
