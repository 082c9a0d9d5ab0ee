#pragma once

#include <cmath>
#include <cstdint>
#include <utility>
#include <vector>

namespace stcnn {

/// Deterministic 64-bit generator (splitmix64). All randomness in the toolkit
/// goes through this type so that results are reproducible across platforms;
/// the standard <random> distributions are implementation-defined and are not
/// used. Independent streams are derived by hashing (seed, stream), which
/// makes per-sample / per-epoch streams reproducible regardless of how many
/// draws other streams consumed.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(mix(seed ^ kGolden)) {}

  static Rng from_stream(std::uint64_t seed, std::uint64_t stream) {
    Rng r(seed);
    r.state_ = mix(r.state_ + mix(stream * kGolden + 0x94d049bb133111ebULL));
    return r;
  }

  std::uint64_t next_u64() {
    state_ += kGolden;
    return mix(state_);
  }

  /// Uniform in [0, 1), 53-bit resolution.
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Uniform integer in [0, n), unbiased (rejection sampling). n must be > 0.
  std::uint64_t bounded(std::uint64_t n) {
    const std::uint64_t threshold = (0ULL - n) % n;
    for (;;) {
      const std::uint64_t r = next_u64();
      if (r >= threshold) return r % n;
    }
  }

  /// Standard normal via Box-Muller. Consumes two uniforms, keeps no spare,
  /// so the generator state stays a single serializable word.
  double normal() {
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * 3.141592653589793238462643 * u2);
  }

  bool coin_flip() { return (next_u64() & 1ULL) != 0; }

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      const std::size_t j = static_cast<std::size_t>(bounded(i));
      std::swap(v[i - 1], v[j]);
    }
  }

  std::uint64_t state() const { return state_; }
  void set_state(std::uint64_t s) { state_ = s; }

 private:
  static constexpr std::uint64_t kGolden = 0x9e3779b97f4a7c15ULL;

  static std::uint64_t mix(std::uint64_t z) {
    z ^= z >> 30;
    z *= 0xbf58476d1ce4e5b9ULL;
    z ^= z >> 27;
    z *= 0x94d049bb133111ebULL;
    z ^= z >> 31;
    return z;
  }

  std::uint64_t state_;
};

}  // namespace stcnn
