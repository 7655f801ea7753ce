#pragma once

#include <random>
#include <vector>

#include "losscarto/losscarto.hpp"

namespace lc_test {

using namespace losscarto;

inline Rational q(long num, long den = 1) {
  Rational r(num, den);
  r.canonicalize();
  return r;
}

inline std::vector<Rational> qs(std::initializer_list<long> values) {
  std::vector<Rational> out;
  for (long v : values) out.push_back(q(v));
  return out;
}

/// Small random rational in [-bound, bound] with denominator up to 8.
inline Rational random_rational(std::mt19937_64& rng, long bound = 4) {
  std::uniform_int_distribution<long> den(1, 8);
  const long d = den(rng);
  std::uniform_int_distribution<long> num(-bound * d, bound * d);
  return q(num(rng), d);
}

inline std::vector<Rational> random_point(std::mt19937_64& rng, std::size_t n, long bound = 4) {
  std::vector<Rational> out(n);
  for (auto& x : out) x = random_rational(rng, bound);
  return out;
}

inline ExactSample exact_sample(std::vector<Rational> input, std::vector<Rational> output) {
  return ExactSample{std::move(input), std::move(output)};
}

/// Flat weight variable w(k, i -> j) as a polynomial.
inline Poly w(const NetworkShape& shape, std::size_t k, std::size_t i, std::size_t j) {
  return Poly::variable(static_cast<Var>(shape.index_of(k, i, j)));
}

inline std::vector<double> to_doubles(const std::vector<Rational>& v) {
  std::vector<double> out;
  for (const auto& x : v) out.push_back(x.get_d());
  return out;
}

}  // namespace lc_test
