#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <string_view>

namespace semres {

// Deterministic random stream. The distribution transforms are written out
// here instead of using <random> distributions so that draws depend only on
// the mt19937_64 output sequence, which the standard fixes bit-for-bit.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}

  // Uniform in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Standard normal via Box-Muller; the second deviate of each pair is cached.
  double gaussian() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1 = 0.0;
    do {
      u1 = uniform();
    } while (u1 <= 0.0);
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    constexpr double two_pi = 6.283185307179586476925286766559;
    spare_ = r * std::sin(two_pi * u2);
    has_spare_ = true;
    return r * std::cos(two_pi * u2);
  }

  // Uniform integer in [0, n), rejection sampled to avoid modulo bias.
  std::uint64_t below(std::uint64_t n) {
    if (n == 0) return 0;
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    std::uint64_t v;
    do {
      v = gen_();
    } while (v >= limit);
    return v % n;
  }

  std::size_t index(std::size_t n) { return static_cast<std::size_t>(below(n)); }

  // Uniform integer in [lo, hi] inclusive.
  std::int64_t range(std::int64_t lo, std::int64_t hi) {
    return lo + static_cast<std::int64_t>(below(static_cast<std::uint64_t>(hi - lo + 1)));
  }

  std::uint64_t raw() { return gen_(); }

  // Derives an independent stream id for a named unit of work, so that
  // concurrent units do not share state and results do not depend on
  // scheduling order.
  static std::uint64_t derive(std::uint64_t seed, std::string_view tag) {
    std::uint64_t h = 1469598103934665603ull;  // FNV-1a over the tag
    for (const char c : tag) {
      h ^= static_cast<unsigned char>(c);
      h *= 1099511628211ull;
    }
    // splitmix64 finalizer over the combination
    std::uint64_t z = seed ^ (h + 0x9e3779b97f4a7c15ull);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
  }

 private:
  std::mt19937_64 gen_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace semres
