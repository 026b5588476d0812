#pragma once

#include <cstdint>

namespace aqt {

/// Splittable counter-based random stream (splitmix64).
///
/// Every stream is identified by a (seed, stream_id) pair; derive() mixes the
/// id into the seed so per-user streams are independent and reproducible
/// regardless of how many draws other streams consume.
class RngStream {
 public:
  RngStream() : state_(0) {}
  explicit RngStream(std::uint64_t seed) : state_(seed) {}

  static std::uint64_t mix(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  /// Child stream: seed mixed with the stream id.
  static RngStream derive(std::uint64_t seed, std::uint64_t stream_id) {
    return RngStream(mix(seed ^ mix(stream_id + 1)));
  }

  std::uint64_t next_u64() {
    state_ += 0x9e3779b97f4a7c15ULL;
    std::uint64_t z = state_;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  /// Uniform draw in [0, 1) with 53 bits of precision.
  double next_unit() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

 private:
  std::uint64_t state_;
};

}  // namespace aqt
