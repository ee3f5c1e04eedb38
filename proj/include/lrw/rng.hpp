#pragma once

#include <cstdint>
#include <random>

namespace lrw {

inline std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Uniform double in [0, 1) from the top 53 bits.
inline double unit_double(std::uint64_t x) noexcept { return static_cast<double>(x >> 11) * 0x1.0p-53; }

/// Independent stream for one path, keyed by (seed, path index) so results do
/// not depend on which worker runs the path.
class PathRng {
 public:
  PathRng(std::uint64_t seed, std::uint64_t path) : eng_(splitmix64(splitmix64(seed) ^ splitmix64(~path))) {}

  double uniform() { return unit_double(eng_()); }
  std::uint64_t bits() { return eng_(); }
  std::uint64_t poisson(double t) {
    if (t <= 0.0) return 0;
    std::poisson_distribution<std::uint64_t> d(t);
    return d(eng_);
  }
  std::mt19937_64& engine() noexcept { return eng_; }

 private:
  std::mt19937_64 eng_;
};

}  // namespace lrw
