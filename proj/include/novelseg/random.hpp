#pragma once

#include <cstdint>
#include <limits>

#include "novelseg/error.hpp"

namespace novelseg {

/// PCG32 (XSH-RR 64/32). A (seed, stream) pair selects an independent
/// sequence, which is how per-entry substreams are derived.
class Pcg32 {
 public:
  using result_type = std::uint32_t;

  explicit Pcg32(std::uint64_t seed = 0x853c49e6748fea9bULL, std::uint64_t stream = 0xda3e39cb94b95bdbULL) {
    state_ = 0;
    inc_ = (stream << 1u) | 1u;
    next();
    state_ += seed;
    next();
  }

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }
  result_type operator()() { return next(); }

  result_type next() {
    const std::uint64_t old = state_;
    state_ = old * 6364136223846793005ULL + inc_;
    const auto xorshifted = static_cast<std::uint32_t>(((old >> 18u) ^ old) >> 27u);
    const auto rot = static_cast<std::uint32_t>(old >> 59u);
    return (xorshifted >> rot) | (xorshifted << ((-rot) & 31u));
  }

  /// Uniform integer in [0, bound) by rejection; bound must be > 0.
  std::uint32_t bounded(std::uint32_t bound) {
    if (bound == 0) throw Error(ErrorCode::invalid_argument, "bounded draw needs a positive bound");
    const std::uint32_t threshold = (-bound) % bound;
    for (;;) {
      const auto r = next();
      if (r >= threshold) return r % bound;
    }
  }

  /// Uniform integer in [lo, hi] inclusive.
  int uniform_int(int lo, int hi) {
    const auto span = static_cast<std::uint32_t>(static_cast<std::int64_t>(hi) - lo + 1);
    return lo + static_cast<int>(bounded(span));
  }

  /// Uniform double in [0, 1) with 53 random bits; consumes two outputs.
  double uniform01() {
    const std::uint64_t hi = next() >> 5;  // 27 bits
    const std::uint64_t lo = next() >> 6;  // 26 bits
    return static_cast<double>((hi << 26) | lo) * 0x1.0p-53;
  }

  /// True with probability p; p <= 0 never, p >= 1 always. Always consumes
  /// the same number of outputs.
  bool bernoulli(double p) { return uniform01() < p; }

 private:
  std::uint64_t state_;
  std::uint64_t inc_;
};

}  // namespace novelseg
