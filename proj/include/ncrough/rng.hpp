#pragma once

#include <cstdint>

namespace ncrough {

// splitmix64 finalizer. Drives the random streams below and doubles as the
// combiner for content fingerprints.
inline std::uint64_t hash_mix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// Deterministic counter-based random stream. Each (seed, stream, step) triple
// owns an independent substream, so draws can happen in any order, and adding
// more steps to a grid never changes the values already drawn for earlier
// steps. Uniforms come from splitmix64; gaussians from Box-Muller with the
// second value of each pair carried over.
class Substream {
 public:
  Substream(std::uint64_t seed, std::uint64_t stream, std::uint64_t step);

  std::uint64_t next_u64();
  double next_uniform();   // strictly inside (0, 1)
  double next_gaussian();  // standard normal

 private:
  std::uint64_t state_;
  double carry_ = 0.0;
  bool has_carry_ = false;
};

}  // namespace ncrough
