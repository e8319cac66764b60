#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <string>

namespace autostat {

// mt19937_64 plus a hand-rolled Box-Muller normal. std::normal_distribution
// is not pinned by the standard, so drawing our own keeps sampled values
// reproducible for a given seed no matter which stdlib the library is built
// against.
class SeededRng {
 public:
  explicit SeededRng(std::uint64_t seed) : gen_(seed) {}

  // in (0, 1]
  double uniform() {
    return (static_cast<double>(gen_() >> 11) + 1.0) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  double normal() {
    double u1 = uniform();
    double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * pi_ * u2);
  }

  double lognormal(double sigma) { return std::exp(sigma * normal()); }

  std::uint64_t next_u64() { return gen_(); }

 private:
  static constexpr double pi_ = 3.14159265358979323846;
  std::mt19937_64 gen_;
};

inline std::uint64_t fnv1a(std::uint64_t h, const std::string& s) {
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

inline std::uint64_t fnv1a(std::uint64_t h, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) {
    h ^= (v >> (8 * i)) & 0xff;
    h *= 1099511628211ULL;
  }
  return h;
}

// Stable seed derivation for sub-tasks (restarts, candidates, trials) so that
// results do not depend on evaluation order.
inline std::uint64_t derive_seed(std::uint64_t seed, const std::string& label,
                                 std::uint64_t a = 0, std::uint64_t b = 0) {
  std::uint64_t h = 1469598103934665603ULL;
  h = fnv1a(h, seed);
  h = fnv1a(h, label);
  h = fnv1a(h, a);
  h = fnv1a(h, b);
  return h;
}

}  // namespace autostat
