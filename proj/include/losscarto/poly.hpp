#pragma once

// Sparse multivariate polynomials over the flat weight variables.
//
// Canonical form: terms sorted by descending graded-lexicographic order of
// their exponent patterns (total degree first, then lexicographic with
// variable 0 > variable 1 > ...), no duplicate patterns, no zero
// coefficients. The zero polynomial has no terms. Two polynomials are equal
// as mathematical objects iff their term sequences are equal.

#include <algorithm>
#include <cmath>
#include <compare>
#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <type_traits>
#include <utility>
#include <vector>

#include "losscarto/errors.hpp"
#include "losscarto/network.hpp"
#include "losscarto/rational.hpp"

namespace losscarto {

using Var = std::uint32_t;

/// Exponent pattern: sorted (variable, exponent) pairs with exponent >= 1.
class Monomial {
 public:
  using Factor = std::pair<Var, std::uint32_t>;

  Monomial() = default;

  static Monomial variable(Var v, std::uint32_t exponent = 1) {
    Monomial m;
    if (exponent > 0) m.factors_.emplace_back(v, exponent);
    return m;
  }

  /// From unsorted pairs; zero exponents dropped, repeated variables merged.
  static Monomial from_factors(std::vector<Factor> factors) {
    std::sort(factors.begin(), factors.end());
    Monomial m;
    for (const auto& [v, e] : factors) {
      if (e == 0) continue;
      if (!m.factors_.empty() && m.factors_.back().first == v) {
        m.factors_.back().second += e;
      } else {
        m.factors_.emplace_back(v, e);
      }
    }
    return m;
  }

  const std::vector<Factor>& factors() const { return factors_; }
  bool is_one() const { return factors_.empty(); }

  std::uint32_t degree() const {
    std::uint32_t d = 0;
    for (const auto& f : factors_) d += f.second;
    return d;
  }

  std::uint32_t exponent(Var v) const {
    auto it = std::lower_bound(factors_.begin(), factors_.end(), Factor{v, 0});
    return (it != factors_.end() && it->first == v) ? it->second : 0;
  }

  Monomial without(Var v) const {
    Monomial m;
    for (const auto& f : factors_) {
      if (f.first != v) m.factors_.push_back(f);
    }
    return m;
  }

  friend Monomial operator*(const Monomial& a, const Monomial& b) {
    Monomial m;
    m.factors_.reserve(a.factors_.size() + b.factors_.size());
    auto i = a.factors_.begin();
    auto j = b.factors_.begin();
    while (i != a.factors_.end() || j != b.factors_.end()) {
      if (j == b.factors_.end() || (i != a.factors_.end() && i->first < j->first)) {
        m.factors_.push_back(*i++);
      } else if (i == a.factors_.end() || j->first < i->first) {
        m.factors_.push_back(*j++);
      } else {
        m.factors_.emplace_back(i->first, i->second + j->second);
        ++i;
        ++j;
      }
    }
    return m;
  }

  friend bool operator==(const Monomial&, const Monomial&) = default;

 private:
  std::vector<Factor> factors_;
};

/// Graded-lex comparison; `greater` means "earlier in canonical order".
inline std::strong_ordering graded_lex(const Monomial& a, const Monomial& b) {
  if (auto c = a.degree() <=> b.degree(); c != 0) return c;
  const auto& fa = a.factors();
  const auto& fb = b.factors();
  std::size_t p = 0;
  for (; p < fa.size() && p < fb.size(); ++p) {
    if (fa[p].first != fb[p].first) {
      // The pattern holding the smaller variable has a positive exponent
      // where the other has zero.
      return fa[p].first < fb[p].first ? std::strong_ordering::greater : std::strong_ordering::less;
    }
    if (fa[p].second != fb[p].second) return fa[p].second <=> fb[p].second;
  }
  if (fa.size() == fb.size()) return std::strong_ordering::equal;
  return fa.size() > fb.size() ? std::strong_ordering::greater : std::strong_ordering::less;
}

struct CanonicalOrder {
  bool operator()(const Monomial& a, const Monomial& b) const { return graded_lex(a, b) > 0; }
};

template <class C>
struct Term {
  Monomial monomial;
  C coeff;

  friend bool operator==(const Term& a, const Term& b) { return a.monomial == b.monomial && a.coeff == b.coeff; }
};

namespace detail {

template <class C>
bool is_zero(const C& c) {
  if constexpr (std::is_same_v<C, Rational>) {
    return sgn(c) == 0;
  } else {
    return c == C(0);
  }
}

template <class C>
C power(const C& base, std::uint32_t e) {
  C result(1);
  C b = base;
  while (e > 0) {
    if (e & 1U) result *= b;
    b *= b;
    e >>= 1U;
  }
  return result;
}

}  // namespace detail

template <class C>
class BasicPoly {
 public:
  using Coefficient = C;

  BasicPoly() = default;

  static BasicPoly constant(const C& c) {
    BasicPoly p;
    if (!detail::is_zero(c)) p.terms_.push_back({Monomial{}, c});
    return p;
  }

  static BasicPoly variable(Var v, const C& coeff = C(1)) {
    BasicPoly p;
    if (!detail::is_zero(coeff)) p.terms_.push_back({Monomial::variable(v), coeff});
    return p;
  }

  static BasicPoly monomial(Monomial m, const C& coeff) {
    BasicPoly p;
    if (!detail::is_zero(coeff)) p.terms_.push_back({std::move(m), coeff});
    return p;
  }

  /// Canonicalizes arbitrary terms: sorts, merges duplicates, drops zeros.
  static BasicPoly from_terms(std::vector<Term<C>> terms) {
    std::map<Monomial, C, CanonicalOrder> acc;
    for (auto& t : terms) {
      auto [it, inserted] = acc.try_emplace(std::move(t.monomial), t.coeff);
      if (!inserted) it->second += t.coeff;
    }
    return from_map(std::move(acc));
  }

  const std::vector<Term<C>>& terms() const { return terms_; }
  std::size_t size() const { return terms_.size(); }
  bool is_zero() const { return terms_.empty(); }
  bool is_constant() const { return terms_.empty() || (terms_.size() == 1 && terms_[0].monomial.is_one()); }

  std::uint32_t total_degree() const { return terms_.empty() ? 0 : terms_.front().monomial.degree(); }

  const C& leading_coefficient() const {
    if (terms_.empty()) throw ZeroPolynomialError("zero polynomial has no leading coefficient");
    return terms_.front().coeff;
  }

  /// Sorted distinct variables.
  std::vector<Var> variables() const {
    std::vector<Var> vars;
    for (const auto& t : terms_) {
      for (const auto& f : t.monomial.factors()) vars.push_back(f.first);
    }
    std::sort(vars.begin(), vars.end());
    vars.erase(std::unique(vars.begin(), vars.end()), vars.end());
    return vars;
  }

  std::uint32_t degree_in(Var v) const {
    std::uint32_t d = 0;
    for (const auto& t : terms_) d = std::max(d, t.monomial.exponent(v));
    return d;
  }

  /// p = sum_e coefficients[e] * v^e with coefficients free of v.
  std::vector<BasicPoly> coefficients_in(Var v) const {
    std::vector<std::vector<Term<C>>> parts(degree_in(v) + 1);
    for (const auto& t : terms_) parts[t.monomial.exponent(v)].push_back({t.monomial.without(v), t.coeff});
    std::vector<BasicPoly> out;
    out.reserve(parts.size());
    for (auto& part : parts) out.push_back(from_terms(std::move(part)));
    return out;
  }

  /// Sum of the terms of total degree d.
  BasicPoly homogeneous_component(std::uint32_t d) const {
    BasicPoly p;
    for (const auto& t : terms_) {
      if (t.monomial.degree() == d) p.terms_.push_back(t);
    }
    return p;
  }

  BasicPoly times_variable(Var v) const {
    BasicPoly p;
    p.terms_.reserve(terms_.size());
    const Monomial x = Monomial::variable(v);
    // Graded lex is a monomial order, so the canonical order survives.
    for (const auto& t : terms_) p.terms_.push_back({t.monomial * x, t.coeff});
    return p;
  }

  BasicPoly scaled(const C& c) const {
    if (detail::is_zero(c)) return {};
    BasicPoly p = *this;
    for (auto& t : p.terms_) t.coeff *= c;
    return p;
  }

  BasicPoly operator-() const {
    BasicPoly p = *this;
    for (auto& t : p.terms_) t.coeff = -t.coeff;
    return p;
  }

  friend BasicPoly operator+(const BasicPoly& a, const BasicPoly& b) { return merge(a, b, false); }
  friend BasicPoly operator-(const BasicPoly& a, const BasicPoly& b) { return merge(a, b, true); }

  friend BasicPoly operator*(const BasicPoly& a, const BasicPoly& b) {
    if (a.is_zero() || b.is_zero()) return {};
    std::map<Monomial, C, CanonicalOrder> acc;
    for (const auto& s : a.terms_) {
      for (const auto& t : b.terms_) {
        C c = s.coeff * t.coeff;
        auto [it, inserted] = acc.try_emplace(s.monomial * t.monomial, c);
        if (!inserted) it->second += c;
      }
    }
    return from_map(std::move(acc));
  }

  BasicPoly& operator+=(const BasicPoly& o) { return *this = *this + o; }
  BasicPoly& operator-=(const BasicPoly& o) { return *this = *this - o; }
  BasicPoly& operator*=(const BasicPoly& o) { return *this = *this * o; }

  friend bool operator==(const BasicPoly& a, const BasicPoly& b) { return a.terms_ == b.terms_; }

  /// Evaluates at a point indexed by variable. Exact for rationals; for
  /// doubles the terms are summed with Neumaier compensation.
  template <class T>
  T evaluate(std::span<const T> point) const {
    if constexpr (std::is_floating_point_v<T>) {
      T sum = 0;
      T comp = 0;
      for (const auto& t : terms_) {
        T v = static_cast<T>(coefficient_value<T>(t.coeff));
        for (const auto& [var, e] : t.monomial.factors()) v *= detail::power(at(point, var), e);
        const T next = sum + v;
        if (std::abs(sum) >= std::abs(v)) {
          comp += (sum - next) + v;
        } else {
          comp += (v - next) + sum;
        }
        sum = next;
      }
      return sum + comp;
    } else {
      T sum(0);
      for (const auto& t : terms_) {
        T v = coefficient_value<T>(t.coeff);
        for (const auto& [var, e] : t.monomial.factors()) v *= detail::power(at(point, var), e);
        sum += v;
      }
      return sum;
    }
  }

  template <class T>
  T evaluate(const std::vector<T>& point) const {
    return evaluate<T>(std::span<const T>(point));
  }

 private:
  std::vector<Term<C>> terms_;

  template <class T>
  static const T& at(std::span<const T> point, Var v) {
    if (v >= point.size()) {
      throw ShapeError("point of length " + std::to_string(point.size()) + " lacks variable " + std::to_string(v));
    }
    return point[v];
  }

  template <class T>
  static T coefficient_value(const C& c) {
    if constexpr (std::is_same_v<C, Rational> && std::is_floating_point_v<T>) {
      return static_cast<T>(c.get_d());
    } else {
      return T(c);
    }
  }

  static BasicPoly from_map(std::map<Monomial, C, CanonicalOrder>&& acc) {
    BasicPoly p;
    p.terms_.reserve(acc.size());
    for (auto& [m, c] : acc) {
      if (!detail::is_zero(c)) p.terms_.push_back({m, c});
    }
    return p;
  }

  static BasicPoly merge(const BasicPoly& a, const BasicPoly& b, bool subtract) {
    BasicPoly p;
    p.terms_.reserve(a.terms_.size() + b.terms_.size());
    auto i = a.terms_.begin();
    auto j = b.terms_.begin();
    while (i != a.terms_.end() || j != b.terms_.end()) {
      std::strong_ordering ord = std::strong_ordering::equal;
      if (i == a.terms_.end()) {
        ord = std::strong_ordering::less;
      } else if (j == b.terms_.end()) {
        ord = std::strong_ordering::greater;
      } else {
        ord = graded_lex(i->monomial, j->monomial);
      }
      if (ord > 0) {
        p.terms_.push_back(*i++);
      } else if (ord < 0) {
        p.terms_.push_back({j->monomial, subtract ? C(-j->coeff) : j->coeff});
        ++j;
      } else {
        C c = subtract ? C(i->coeff - j->coeff) : C(i->coeff + j->coeff);
        if (!detail::is_zero(c)) p.terms_.push_back({i->monomial, c});
        ++i;
        ++j;
      }
    }
    return p;
  }
};

/// Total order on canonical polynomials (term by term, shorter first), used
/// for deterministic containers and reports.
template <class C>
bool canonical_less(const BasicPoly<C>& a, const BasicPoly<C>& b) {
  const auto& ta = a.terms();
  const auto& tb = b.terms();
  for (std::size_t p = 0; p < ta.size() && p < tb.size(); ++p) {
    if (auto c = graded_lex(ta[p].monomial, tb[p].monomial); c != 0) return c > 0;
    if (ta[p].coeff != tb[p].coeff) return ta[p].coeff < tb[p].coeff;
  }
  return ta.size() < tb.size();
}

struct PolyLess {
  template <class C>
  bool operator()(const BasicPoly<C>& a, const BasicPoly<C>& b) const {
    return canonical_less(a, b);
  }
};

using Poly = BasicPoly<Rational>;
using FloatPoly = BasicPoly<double>;

inline FloatPoly to_float(const Poly& p) {
  std::vector<Term<double>> terms;
  terms.reserve(p.size());
  for (const auto& t : p.terms()) terms.push_back({t.monomial, t.coeff.get_d()});
  return FloatPoly::from_terms(std::move(terms));
}

/// Drops float coefficients with magnitude at or below `abs_tol`.
inline FloatPoly pruned(const FloatPoly& p, double abs_tol) {
  std::vector<Term<double>> terms;
  for (const auto& t : p.terms()) {
    if (std::abs(t.coeff) > abs_tol) terms.push_back(t);
  }
  return FloatPoly::from_terms(std::move(terms));
}

/// Largest coefficient magnitude (0 for the zero polynomial).
template <class C>
double max_abs_coefficient(const BasicPoly<C>& p) {
  double m = 0.0;
  for (const auto& t : p.terms()) {
    double v = 0.0;
    if constexpr (std::is_same_v<C, Rational>) {
      v = std::abs(t.coeff.get_d());
    } else {
      v = std::abs(t.coeff);
    }
    m = std::max(m, v);
  }
  return m;
}

/// Substitutes variable v -> images[v] for every variable present.
template <class C>
BasicPoly<C> compose(const BasicPoly<C>& p, const std::vector<BasicPoly<C>>& images) {
  BasicPoly<C> out;
  for (const auto& t : p.terms()) {
    BasicPoly<C> term = BasicPoly<C>::constant(t.coeff);
    for (const auto& [v, e] : t.monomial.factors()) {
      if (v >= images.size()) throw ShapeError("no image for variable " + std::to_string(v));
      for (std::uint32_t r = 0; r < e; ++r) term *= images[v];
    }
    out += term;
  }
  return out;
}

/// Restriction of p to the line w = base + t * direction, as a polynomial
/// in variable 0 (= t).
template <class C>
BasicPoly<C> restrict_to_line(const BasicPoly<C>& p, std::span<const C> base, std::span<const C> direction) {
  if (base.size() != direction.size()) throw ShapeError("line base and direction differ in length");
  std::vector<BasicPoly<C>> images;
  images.reserve(base.size());
  for (std::size_t v = 0; v < base.size(); ++v) {
    images.push_back(BasicPoly<C>::constant(base[v]) + BasicPoly<C>::variable(0, direction[v]));
  }
  return compose(p, images);
}

/// Divides by the leading canonical coefficient, so polynomials equal up to a
/// nonzero rational scalar share one representative.
inline Poly normalized(const Poly& p) {
  if (p.is_zero()) return p;
  const Rational lead = p.leading_coefficient();
  return p.scaled(Rational(1) / lead);
}

inline bool same_up_to_scale(const Poly& a, const Poly& b) { return normalized(a) == normalized(b); }

// ---------------------------------------------------------------------------
// Layer-wise degree.

/// One entry per weight layer; weight w^(k) has degree e_k.
struct MultiDegree {
  std::vector<std::size_t> entries;

  friend bool operator==(const MultiDegree&, const MultiDegree&) = default;

  friend MultiDegree operator+(const MultiDegree& a, const MultiDegree& b) {
    if (a.entries.size() != b.entries.size()) throw ShapeError("multidegree length mismatch");
    MultiDegree out = a;
    for (std::size_t k = 0; k < out.entries.size(); ++k) out.entries[k] += b.entries[k];
    return out;
  }

  /// (1,...,1,0,...,0) with `ones` leading ones.
  static MultiDegree leading_ones(std::size_t length, std::size_t ones) {
    MultiDegree d{std::vector<std::size_t>(length, 0)};
    for (std::size_t k = 0; k < ones && k < length; ++k) d.entries[k] = 1;
    return d;
  }
};

inline MultiDegree layerwise_degree(const Monomial& m, const NetworkShape& shape) {
  MultiDegree d{std::vector<std::size_t>(shape.weight_layers(), 0)};
  for (const auto& [v, e] : m.factors()) d.entries[shape.layer_of(v) - 1] += e;
  return d;
}

/// The common layer-wise degree of all monomials, or nullopt when the
/// monomials disagree (p is not homogeneous).
template <class C>
std::optional<MultiDegree> layerwise_degree(const BasicPoly<C>& p, const NetworkShape& shape) {
  if (p.is_zero()) throw DegreeError("layer-wise degree of the zero polynomial is undefined");
  const MultiDegree first = layerwise_degree(p.terms().front().monomial, shape);
  for (const auto& t : p.terms()) {
    if (layerwise_degree(t.monomial, shape) != first) return std::nullopt;
  }
  return first;
}

// ---------------------------------------------------------------------------
// Divisibility by a polynomial that is linear in one of its variables.

/// First variable (in index order) of degree exactly one in u.
inline std::optional<Var> linear_variable(const Poly& u) {
  for (Var v : u.variables()) {
    if (u.degree_in(v) == 1) return v;
  }
  return std::nullopt;
}

/// Writes u = A*x + B for u's first degree-one variable x and reports whether
/// A^deg_x(f) * f(x := -B/A) is identically zero, i.e. whether f vanishes on
/// {u = 0}. For irreducible u coprime to A this is exactly "u divides f".
inline bool pseudo_divides(const Poly& u, const Poly& f) {
  if (u.is_zero()) throw UnsupportedDivisorError("divisor is the zero polynomial");
  const auto x = linear_variable(u);
  if (!x) throw UnsupportedDivisorError("divisor has no variable of degree one");
  if (f.is_zero()) return true;
  const auto ub = u.coefficients_in(*x);  // ub[0] = B, ub[1] = A
  const Poly& B = ub[0];
  const Poly& A = ub[1];
  const auto fe = f.coefficients_in(*x);
  const std::size_t d = fe.size() - 1;
  const Poly minus_b = -B;
  // Horner-like accumulation of sum_e f_e (-B)^e A^(d-e).
  std::vector<Poly> a_pow(d + 1), b_pow(d + 1);
  a_pow[0] = Poly::constant(1);
  b_pow[0] = Poly::constant(1);
  for (std::size_t e = 1; e <= d; ++e) {
    a_pow[e] = a_pow[e - 1] * A;
    b_pow[e] = b_pow[e - 1] * minus_b;
  }
  Poly remainder;
  for (std::size_t e = 0; e <= d; ++e) {
    if (fe[e].is_zero()) continue;
    remainder += fe[e] * b_pow[e] * a_pow[d - e];
  }
  return remainder.is_zero();
}

// ---------------------------------------------------------------------------
// Linear polynomials.

enum class LinearKind { SingleWeight, FirstLayerSupported, Other };

inline const char* to_string(LinearKind kind) {
  switch (kind) {
    case LinearKind::SingleWeight: return "single-weight";
    case LinearKind::FirstLayerSupported: return "first-layer-supported";
    case LinearKind::Other: return "other";
  }
  return "other";
}

template <class C>
struct LinearSupport {
  LinearKind kind = LinearKind::Other;
  /// Flat-indexed coefficients (length N) for every kind.
  std::vector<C> flat;
  /// FirstLayerSupported only: coefficients by source node (length d_1).
  std::vector<C> by_source;
  /// FirstLayerSupported only: the common target node j of layer 2.
  std::size_t target = 0;
  /// SingleWeight only.
  Var variable = 0;
};

/// Classifies a homogeneous linear polynomial by its variable support.
template <class C>
LinearSupport<C> linear_support(const BasicPoly<C>& p, const NetworkShape& shape) {
  if (p.is_zero()) throw DegreeError("zero polynomial has no linear support");
  for (const auto& t : p.terms()) {
    if (t.monomial.degree() != 1) throw DegreeError("linear_support requires every term to have degree one");
  }
  LinearSupport<C> out;
  out.flat.assign(shape.weight_count(), C(0));
  for (const auto& t : p.terms()) {
    const Var v = t.monomial.factors().front().first;
    if (v >= shape.weight_count()) throw IndexError("variable outside the weight space");
    out.flat[v] = t.coeff;
  }
  if (p.size() == 1) {
    out.kind = LinearKind::SingleWeight;
    out.variable = p.terms().front().monomial.factors().front().first;
    return out;
  }
  std::optional<std::size_t> target;
  for (const auto& t : p.terms()) {
    const auto c = shape.coord_of(t.monomial.factors().front().first);
    if (c.layer != 1 || (target && *target != c.target)) return out;
    target = c.target;
  }
  out.kind = LinearKind::FirstLayerSupported;
  out.target = *target;
  out.by_source.assign(shape.input_width(), C(0));
  for (const auto& t : p.terms()) {
    const auto c = shape.coord_of(t.monomial.factors().front().first);
    out.by_source[c.source - 1] = t.coeff;
  }
  return out;
}

}  // namespace losscarto
