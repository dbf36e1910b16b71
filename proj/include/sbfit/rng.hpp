// Apache License, Version 2.0, refer to LICENSE.txt

#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <random>
#include <stdexcept>

namespace sbfit {

namespace detail {

constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

}  // namespace detail

/// Seedable random stream. All variates below are generated from the raw
/// 64-bit engine output by explicit transforms, so a seed yields the same
/// sequence on every platform (the std:: distribution objects do not
/// guarantee that).
class RngStream {
 public:
  explicit RngStream(std::uint64_t seed = 0) : seed_(seed), engine_(detail::splitmix64(seed)) {}

  /// Sub-stream for replication `index` of an experiment seeded with `master`.
  static RngStream derive(std::uint64_t master, std::uint64_t index) {
    return RngStream(detail::splitmix64(detail::splitmix64(master) ^ detail::splitmix64(~index)));
  }

  std::uint64_t seed() const noexcept { return seed_; }
  std::uint64_t next_u64() { return engine_(); }

  /// Uniform on the open interval (0, 1), 53-bit resolution.
  double next_open01() { return (static_cast<double>(engine_() >> 11) + 0.5) * 0x1p-53; }

  /// Standard normal by the polar method; the second variate of each pair
  /// is cached.
  double next_normal() {
    if (spare_) {
      double z = *spare_;
      spare_.reset();
      return z;
    }
    double u, v, s;
    do {
      u = 2.0 * next_open01() - 1.0;
      v = 2.0 * next_open01() - 1.0;
      s = u * u + v * v;
    } while (s >= 1.0 || s == 0.0);
    double f = std::sqrt(-2.0 * std::log(s) / s);
    spare_ = v * f;
    return u * f;
  }

 private:
  std::uint64_t seed_;
  std::mt19937_64 engine_;
  std::optional<double> spare_;
};

inline double sample_uniform(RngStream& rng, double a, double b) {
  if (!(a < b) || !std::isfinite(a) || !std::isfinite(b))
    throw std::invalid_argument("sample_uniform: require finite a < b");
  for (;;) {
    double x = a + (b - a) * rng.next_open01();
    // rounding can land on an endpoint when b - a is tiny relative to |a|
    if (x > a && x < b) return x;
  }
}

inline double sample_normal(RngStream& rng, double mean, double sd) {
  if (!(sd > 0.0) || !std::isfinite(sd) || !std::isfinite(mean))
    throw std::invalid_argument("sample_normal: require finite mean and sd > 0");
  return mean + sd * rng.next_normal();
}

inline double sample_standard_exponential(RngStream& rng) { return -std::log(rng.next_open01()); }

/// shift + Exp(1): proposal density exp{-(x - shift)} on (shift, inf).
inline double sample_shifted_exponential(RngStream& rng, double shift) {
  if (!std::isfinite(shift)) throw std::invalid_argument("sample_shifted_exponential: non-finite shift");
  for (;;) {
    double x = shift + sample_standard_exponential(rng);
    if (x > shift) return x;
  }
}

/// Unit-scale gamma variate. Marsaglia & Tsang squeeze method for shape >= 1;
/// shape < 1 is boosted through G(shape + 1) * U^(1/shape).
inline double sample_gamma(RngStream& rng, double shape) {
  if (!(shape > 0.0) || !std::isfinite(shape))
    throw std::invalid_argument("sample_gamma: shape must be positive and finite");
  if (shape < 1.0) {
    double g = sample_gamma(rng, shape + 1.0);
    double x = g * std::exp(std::log(rng.next_open01()) / shape);
    return x > 0.0 ? x : std::numeric_limits<double>::min();
  }
  const double d = shape - 1.0 / 3.0;
  const double c = 1.0 / std::sqrt(9.0 * d);
  for (;;) {
    double z, v;
    do {
      z = rng.next_normal();
      v = 1.0 + c * z;
    } while (v <= 0.0);
    v = v * v * v;
    double u = rng.next_open01();
    double z2 = z * z;
    if (u < 1.0 - 0.0331 * z2 * z2) return d * v;
    if (std::log(u) < 0.5 * z2 + d * (1.0 - v + std::log(v))) return d * v;
  }
}

}  // namespace sbfit
