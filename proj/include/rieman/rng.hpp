#pragma once

#include <cmath>
#include <cstdint>

namespace rieman {

// Deterministic random stream for the scene generator. The bit stream is
// fully specified here so outputs can be reproduced in any language:
//
//   mix64(z) is the splitmix64 finalizer:
//       z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9
//       z = (z ^ (z >> 27)) * 0x94D049BB133111EB
//       return z ^ (z >> 31)
//   next_u64(): state += 0x9E3779B97F4A7C15 (mod 2^64); return mix64(state)
//   next_double(): ((next_u64() >> 11) + 1) * 2^-53, uniform in (0, 1]
//   gaussian(): Box-Muller pairs from two consecutive uniforms u0, u1:
//       r = sqrt(-2 ln u0), first value r*cos(2 pi u1), cached second
//       value r*sin(2 pi u1)
//   substream(seed, id): initial state = mix64(mix64(seed) + id)
//
// All arithmetic is mod 2^64. Results are independent of platform.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}

  static std::uint64_t mix64(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  // Independent stream derived from (seed, stream id), e.g. per pose index.
  static Rng substream(std::uint64_t seed, std::uint64_t id) {
    return Rng(mix64(mix64(seed) + id));
  }

  std::uint64_t next_u64() {
    state_ += 0x9E3779B97F4A7C15ULL;
    return mix64(state_);
  }

  // Uniform in (0, 1]; never returns 0, so log() below is safe.
  double next_double() {
    return static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53;
  }

  // Uniform in [lo, hi).
  double uniform(double lo, double hi) {
    return lo + (hi - lo) * (next_double() - 0x1.0p-53);
  }

  int uniform_int(int lo, int hi) {  // inclusive range [lo, hi]
    const auto span = static_cast<std::uint64_t>(hi - lo) + 1;
    return lo + static_cast<int>(next_u64() % span);
  }

  double gaussian() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    const double u0 = next_double();
    const double u1 = next_double();
    const double r = std::sqrt(-2.0 * std::log(u0));
    const double a = 2.0 * 3.14159265358979323846 * u1;
    spare_ = r * std::sin(a);
    has_spare_ = true;
    return r * std::cos(a);
  }

 private:
  std::uint64_t state_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace rieman
