#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>

namespace graphsmooth {

/// Counter-based random stream built on splitmix64. Streams are addressed by
/// (seed, stream id): any worker can reconstruct the stream for a given trial
/// index without sharing state, so simulation results do not depend on how
/// trials are distributed over threads.
class RngStream {
 public:
  explicit RngStream(std::uint64_t seed, std::uint64_t stream = 0,
                     std::uint64_t substream = 0)
      : state_(mix(mix(mix(seed + kGolden) ^ stream) ^ substream)) {}

  std::uint64_t next_u64() {
    state_ += kGolden;
    return mix(state_);
  }

  /// Uniform double in (0, 1); never returns 0 so log() is safe.
  double next_uniform() {
    return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
  }

  /// Standard normal via Box-Muller, one cached variate per pair.
  double next_normal() {
    if (has_cached_) {
      has_cached_ = false;
      return cached_;
    }
    const double u1 = next_uniform();
    const double u2 = next_uniform();
    const double radius = std::sqrt(-2.0 * std::log(u1));
    const double angle = 2.0 * std::numbers::pi * u2;
    cached_ = radius * std::sin(angle);
    has_cached_ = true;
    return radius * std::cos(angle);
  }

  /// Gamma(shape, 1) via Marsaglia-Tsang; shape < 1 handled with the
  /// standard power boost Gamma(a) = Gamma(a+1) * U^(1/a).
  double next_gamma(double shape) {
    if (shape < 1.0) {
      const double u = next_uniform();
      return next_gamma(shape + 1.0) * std::pow(u, 1.0 / shape);
    }
    const double d = shape - 1.0 / 3.0;
    const double c = 1.0 / std::sqrt(9.0 * d);
    for (;;) {
      double z = next_normal();
      double v = 1.0 + c * z;
      if (v <= 0.0) continue;
      v = v * v * v;
      const double u = next_uniform();
      if (std::log(u) < 0.5 * z * z + d - d * v + d * std::log(v)) {
        return d * v;
      }
    }
  }

  /// Central chi-square with dof degrees of freedom.
  double next_chi_squared(int dof) { return 2.0 * next_gamma(0.5 * dof); }

 private:
  static constexpr std::uint64_t kGolden = 0x9e3779b97f4a7c15ULL;

  static std::uint64_t mix(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  std::uint64_t state_;
  double cached_ = 0.0;
  bool has_cached_ = false;
};

}  // namespace graphsmooth
