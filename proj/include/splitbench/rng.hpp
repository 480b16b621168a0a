#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <span>
#include <string_view>
#include <utility>
#include <vector>

namespace splitbench {

// SplitMix64 finalizer; used to fan a single experiment seed out into
// independent per-component streams.
constexpr std::uint64_t mix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

constexpr std::uint64_t fnv1a(std::string_view s) noexcept {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (char c : s) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  return h;
}

// derive_seed(base, "batches", client, epoch) etc. The component tag is
// hashed with FNV-1a, then base, tag and each index are chained through
// mix64 in order.
template <typename... Ix>
constexpr std::uint64_t derive_seed(std::uint64_t base, std::string_view tag,
                                    Ix... indices) noexcept {
  std::uint64_t s = mix64(base ^ mix64(fnv1a(tag)));
  ((s = mix64(s ^ static_cast<std::uint64_t>(indices))), ...);
  return s;
}

// Seeded generator with portable distributions. std::mt19937_64's output
// sequence is fixed by the standard; the std:: distributions are not, so
// the samplers below are written out to keep runs reproducible across
// standard libraries.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  // Uniform in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Uniform integer in [0, n) by rejection.
  std::uint64_t below(std::uint64_t n) {
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    std::uint64_t x;
    do {
      x = engine_();
    } while (x >= limit);
    return x % n;
  }

  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1;
    do {
      u1 = uniform();
    } while (u1 <= 0.0);
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 2.0 * std::numbers::pi * u2;
    spare_ = r * std::sin(theta);
    has_spare_ = true;
    return r * std::cos(theta);
  }

  // Marsaglia-Tsang; shape < 1 via the Gamma(shape + 1) * U^(1/shape) boost.
  double gamma(double shape) {
    if (shape < 1.0) {
      double u;
      do {
        u = uniform();
      } while (u <= 0.0);
      return gamma(shape + 1.0) * std::pow(u, 1.0 / shape);
    }
    const double d = shape - 1.0 / 3.0;
    const double c = 1.0 / std::sqrt(9.0 * d);
    for (;;) {
      double x, v;
      do {
        x = normal();
        v = 1.0 + c * x;
      } while (v <= 0.0);
      v = v * v * v;
      const double u = uniform();
      if (u < 1.0 - 0.0331 * x * x * x * x) return d * v;
      if (u > 0.0 && std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v)))
        return d * v;
    }
  }

  // Symmetric Dirichlet(alpha) over `n` categories. If every gamma draw
  // underflows (tiny alpha) the whole mass goes to one uniformly chosen
  // category, which is the alpha -> 0 limit.
  std::vector<double> dirichlet(std::size_t n, double alpha) {
    std::vector<double> p(n);
    double sum = 0.0;
    for (auto& v : p) {
      v = gamma(alpha);
      sum += v;
    }
    if (!(sum > 0.0)) {
      std::fill(p.begin(), p.end(), 0.0);
      p[below(n)] = 1.0;
      return p;
    }
    for (auto& v : p) v /= sum;
    return p;
  }

  template <typename T>
  void shuffle(std::span<T> items) {
    for (std::size_t i = items.size(); i > 1; --i) {
      const std::size_t j = below(i);
      std::swap(items[i - 1], items[j]);
    }
  }

 private:
  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace splitbench
