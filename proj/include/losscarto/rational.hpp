#pragma once

#include <gmpxx.h>

#include <cmath>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "losscarto/errors.hpp"

namespace losscarto {

using Rational = mpq_class;

/// Exact conversion; every finite double is a dyadic rational.
inline Rational to_rational(double value) {
  if (!std::isfinite(value)) throw ValidationError("non-finite value cannot be made rational");
  Rational q(value);
  q.canonicalize();
  return q;
}

inline std::vector<Rational> to_rational(std::span<const double> values) {
  std::vector<Rational> out;
  out.reserve(values.size());
  for (double v : values) out.push_back(to_rational(v));
  return out;
}

inline double to_double(const Rational& q) { return q.get_d(); }

inline std::vector<double> to_double(std::span<const Rational> values) {
  std::vector<double> out;
  out.reserve(values.size());
  for (const auto& v : values) out.push_back(v.get_d());
  return out;
}

/// "p/q" form, or "p" when the denominator is one.
inline std::string rational_string(const Rational& q) { return q.get_str(); }

inline Rational parse_rational(std::string_view text) {
  Rational q;
  if (q.set_str(std::string(text), 10) != 0) {
    throw ValidationError("malformed rational '" + std::string(text) + "'");
  }
  if (q.get_den() == 0) throw ValidationError("zero denominator in '" + std::string(text) + "'");
  q.canonicalize();
  return q;
}

}  // namespace losscarto
