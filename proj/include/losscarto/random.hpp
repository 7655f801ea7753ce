#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

namespace losscarto {

/// Generator for one independent stream, derived from (seed, stream) so
/// results do not depend on the order streams are consumed in.
inline std::mt19937_64 make_stream(std::uint64_t seed, std::uint64_t stream = 0) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32),
                    0x6c6f7373u};
  return std::mt19937_64(seq);
}

/// Uniform on [-1, 1) restricted to multiples of 2^-bits. Built from raw
/// generator bits only, so the sequence is identical on every platform.
inline double uniform_dyadic(std::mt19937_64& rng, int bits = 20) {
  const std::uint64_t k = rng() >> (63 - bits);  // [0, 2^(bits+1))
  return std::ldexp(static_cast<double>(k), -bits) - 1.0;
}

/// Uniform on [0, 1).
inline double uniform_unit(std::mt19937_64& rng) {
  return std::ldexp(static_cast<double>(rng() >> 11), -53);
}

inline double standard_normal(std::mt19937_64& rng) {
  // Box-Muller on portable uniforms.
  double u1 = uniform_unit(rng);
  while (u1 <= 0.0) u1 = uniform_unit(rng);
  const double u2 = uniform_unit(rng);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
}

inline std::vector<double> random_unit_vector(std::mt19937_64& rng, std::size_t n) {
  std::vector<double> v(n);
  double norm = 0.0;
  do {
    norm = 0.0;
    for (auto& x : v) {
      x = standard_normal(rng);
      norm += x * x;
    }
  } while (norm == 0.0);
  norm = std::sqrt(norm);
  for (auto& x : v) x /= norm;
  return v;
}

/// Uniform in the closed ball of the given radius.
inline std::vector<double> random_in_ball(std::mt19937_64& rng, std::size_t n, double radius) {
  auto v = random_unit_vector(rng, n);
  const double r = radius * std::pow(uniform_unit(rng), 1.0 / static_cast<double>(n));
  for (auto& x : v) x *= r;
  return v;
}

}  // namespace losscarto
