#pragma once

// Locating nonsmooth points of a black-box loss along lines.
//
// The loss is piecewise polynomial with a known degree bound D, so on any
// stretch free of kinks the finite difference of order D+1 vanishes up to
// roundoff. A scan flags grid stencils where it does not, and refinement
// compares the polynomial pieces extrapolated from either side.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <random>
#include <span>
#include <vector>

#include "losscarto/errors.hpp"
#include "losscarto/oracle.hpp"
#include "losscarto/random.hpp"

namespace losscarto {

struct Line {
  std::vector<double> base;
  std::vector<double> direction;

  std::vector<double> at(double t) const {
    std::vector<double> w(base.size());
    for (std::size_t v = 0; v < w.size(); ++v) w[v] = base[v] + t * direction[v];
    return w;
  }
};

struct KinkPoint {
  std::vector<double> location;
  Line line;
  double t = 0.0;
  double bracket_width = 0.0;
  /// Largest gap between the two one-sided pieces over the initial bracket.
  double jump_magnitude = 0.0;
};

struct KinkOptions {
  /// Degree bound of the polynomial pieces along a line (2(L-1) for L layers).
  std::size_t degree = 4;
  /// A stencil is flagged when |difference| > tol * (largest |E| on it).
  double tol = 1e-9;
  /// Refinement stops once the bracket is narrower than this.
  double refine_tol = 1e-13;
  /// Oracle queries allowed per refinement.
  std::size_t refine_queries = 200;
};

namespace detail {

/// Newton-form interpolant through (nodes, values).
class NewtonInterpolant {
 public:
  NewtonInterpolant(std::vector<double> nodes, std::vector<double> values) : nodes_(std::move(nodes)) {
    coeffs_ = std::move(values);
    const std::size_t n = nodes_.size();
    for (std::size_t level = 1; level < n; ++level) {
      for (std::size_t i = n - 1; i >= level; --i) {
        coeffs_[i] = (coeffs_[i] - coeffs_[i - 1]) / (nodes_[i] - nodes_[i - level]);
      }
    }
  }

  /// Value and first derivative.
  std::pair<double, double> eval(double u) const {
    const std::size_t n = coeffs_.size();
    double p = coeffs_[n - 1];
    double dp = 0.0;
    for (std::size_t k = n - 1; k-- > 0;) {
      dp = dp * (u - nodes_[k]) + p;
      p = p * (u - nodes_[k]) + coeffs_[k];
    }
    return {p, dp};
  }

  double operator()(double u) const { return eval(u).first; }

 private:
  std::vector<double> nodes_;
  std::vector<double> coeffs_;
};

inline double binomial(std::size_t n, std::size_t k) {
  double r = 1.0;
  for (std::size_t i = 1; i <= k; ++i) r = r * static_cast<double>(n - k + i) / static_cast<double>(i);
  return r;
}

/// Root of f on [a, b] given a sign change, by plain bisection.
template <class F>
double bisect_root(F f, double a, double b) {
  double fa = f(a);
  for (int it = 0; it < 200 && b - a > 0; ++it) {
    const double m = 0.5 * (a + b);
    if (m <= a || m >= b) break;
    const double fm = f(m);
    if (fm == 0.0) return m;
    if ((fm < 0) == (fa < 0)) {
      a = m;
      fa = fm;
    } else {
      b = m;
    }
  }
  return 0.5 * (a + b);
}

}  // namespace detail

/// Refines a kink bracketed by [t_lo, t_hi] on `line`.
///
/// The pieces on either side are interpolated from degree+1 equally spaced
/// samples beyond each end of the bracket; bisection then keeps the half
/// whose midpoint value disagrees with the left piece, until the bracket is
/// narrower than refine_tol or the pieces become indistinguishable. The
/// final estimate is the root of the piece difference (or of its derivative
/// when the pieces meet tangentially) inside the last bracket.
inline KinkPoint refine_kink(const LossOracle& oracle, const Line& line, double t_lo, double t_hi,
                             const KinkOptions& opts = {}) {
  if (!(t_hi > t_lo)) throw ValidationError("refine_kink needs t_lo < t_hi");
  const std::size_t D = opts.degree;
  const double delta = t_hi - t_lo;
  // Local coordinate u = (t - t_lo) / delta; the bracket is u in [0, 1].
  auto t_of = [&](double u) { return t_lo + u * delta; };
  auto query = [&](double u) { return oracle(line.at(t_of(u))); };

  std::vector<double> left_nodes, left_values, right_nodes, right_values;
  double scale = 0.0;
  for (std::size_t m = 0; m <= D; ++m) {
    left_nodes.push_back(-static_cast<double>(m));
    left_values.push_back(query(left_nodes.back()));
    right_nodes.push_back(1.0 + static_cast<double>(m));
    right_values.push_back(query(right_nodes.back()));
    scale = std::max({scale, std::abs(left_values.back()), std::abs(right_values.back())});
  }
  const detail::NewtonInterpolant left(left_nodes, left_values);
  const detail::NewtonInterpolant right(right_nodes, right_values);
  const double noise = 1e-12 * std::max(scale, std::numeric_limits<double>::min());
  auto gap = [&](double u) { return left(u) - right(u); };

  const double jump = std::max({std::abs(gap(0.0)), std::abs(gap(0.5)), std::abs(gap(1.0))});
  if (jump <= 100.0 * noise) throw SpuriousKinkError("one-sided pieces agree across the bracket");

  double a = 0.0;
  double b = 1.0;
  const std::size_t used = 2 * (D + 1);
  const std::size_t steps = opts.refine_queries > used ? opts.refine_queries - used : 0;
  for (std::size_t it = 0; it < steps && (b - a) * delta >= opts.refine_tol; ++it) {
    const double m = 0.5 * (a + b);
    const double g = query(m);
    const double el = std::abs(g - left(m));
    const double er = std::abs(g - right(m));
    if (std::max(el, er) <= noise) break;
    if (el < er) {
      a = m;
    } else {
      b = m;
    }
  }

  double u_star = 0.5 * (a + b);
  const double ga = gap(a);
  const double gb = gap(b);
  if (std::abs(ga) > noise && std::abs(gb) > noise && (ga < 0) != (gb < 0)) {
    u_star = detail::bisect_root(gap, a, b);
  } else {
    auto slope_gap = [&](double u) { return left.eval(u).second - right.eval(u).second; };
    const double sa = slope_gap(a);
    const double sb = slope_gap(b);
    if ((sa < 0) != (sb < 0)) u_star = detail::bisect_root(slope_gap, a, b);
  }

  KinkPoint k;
  k.line = line;
  k.t = t_of(u_star);
  k.location = line.at(k.t);
  k.bracket_width = (b - a) * delta;
  k.jump_magnitude = jump;
  return k;
}

struct KinkScan {
  /// Refined kinks sorted by t.
  std::vector<KinkPoint> kinks;
  /// Brackets that were flagged but failed refinement.
  std::vector<std::pair<double, double>> rejected;
};

/// Scans E(base + t * direction) on an evenly spaced grid over [t_lo, t_hi].
/// Kinks closer together than degree+1 grid steps may be missed or merged.
inline KinkScan detect_kinks_on_line(const LossOracle& oracle, const Line& line, double t_lo, double t_hi,
                                     std::size_t grid_size, const KinkOptions& opts = {}) {
  if (grid_size < 8) throw ValidationError("grid_size must be at least 8");
  if (grid_size < opts.degree + 3) throw ValidationError("grid too coarse for the degree bound");
  if (line.direction.size() != oracle.dimension() || line.base.size() != oracle.dimension()) {
    throw ShapeError("line dimension does not match the oracle");
  }
  if (std::all_of(line.direction.begin(), line.direction.end(), [](double v) { return v == 0.0; })) {
    throw ValidationError("line direction must be nonzero");
  }
  const std::size_t G = grid_size;
  const std::size_t order = opts.degree + 1;
  const double h = (t_hi - t_lo) / static_cast<double>(G - 1);
  auto t_at = [&](std::size_t m) { return t_lo + h * static_cast<double>(m); };

  std::vector<double> g(G);
  for (std::size_t m = 0; m < G; ++m) g[m] = oracle(line.at(t_at(m)));

  std::vector<double> weights(order + 1);
  for (std::size_t r = 0; r <= order; ++r) {
    weights[r] = detail::binomial(order, r) * (((order - r) % 2 == 0) ? 1.0 : -1.0);
  }
  const std::size_t stencils = G - order;
  std::vector<bool> flagged(stencils, false);
  for (std::size_t m = 0; m < stencils; ++m) {
    double diff = 0.0;
    double scale = 0.0;
    for (std::size_t r = 0; r <= order; ++r) {
      diff += weights[r] * g[m + r];
      scale = std::max(scale, std::abs(g[m + r]));
    }
    flagged[m] = std::abs(diff) > opts.tol * scale;
  }

  // Runs of flagged stencils. A lone kink in (t_j, t_j+1) flags the D+1
  // stencils starting at j-D..j, whose spans intersect in [t_j, t_j+1].
  std::vector<std::pair<std::size_t, std::size_t>> brackets;  // grid index pairs
  for (std::size_t m = 0; m < stencils;) {
    if (!flagged[m]) {
      ++m;
      continue;
    }
    std::size_t e = m;
    while (e + 1 < stencils && flagged[e + 1]) ++e;
    const std::size_t run = e - m + 1;
    if (run <= order) {
      brackets.emplace_back(e, m + order);
    } else {
      brackets.emplace_back(m + order - 1, m + order);
      brackets.emplace_back(e, e + 1);
    }
    m = e + 1;
  }

  KinkScan out;
  for (const auto& [i, j] : brackets) {
    const double lo = t_at(std::min(i, j));
    const double hi = t_at(std::max(i, j));
    if (!(hi > lo)) continue;
    try {
      auto k = refine_kink(oracle, line, lo, hi, opts);
      const bool duplicate = std::any_of(out.kinks.begin(), out.kinks.end(), [&](const KinkPoint& q) {
        return std::abs(q.t - k.t) <= 1e-9 * std::max(1.0, std::abs(k.t));
      });
      if (!duplicate) out.kinks.push_back(std::move(k));
    } catch (const SpuriousKinkError&) {
      out.rejected.emplace_back(lo, hi);
    }
  }
  std::sort(out.kinks.begin(), out.kinks.end(), [](const KinkPoint& a, const KinkPoint& b) { return a.t < b.t; });
  return out;
}

struct HarvestOptions {
  std::size_t grid = 24;
  /// Failed perturbed lines tolerated per requested point.
  std::size_t retries_per_point = 8;
};

/// The seed plus `count` further kinks near it, each found on the seed line
/// shifted by a random offset of norm <= radius. All points lie within
/// 2 * radius of the seed.
inline std::vector<std::vector<double>> harvest_sheet_points(const LossOracle& oracle, const KinkPoint& seed,
                                                             std::size_t count, double radius, std::mt19937_64& rng,
                                                             const KinkOptions& opts = {},
                                                             const HarvestOptions& hopts = {}) {
  if (!(radius > 0)) throw ValidationError("harvest radius must be positive");
  const std::size_t n = seed.location.size();
  std::vector<std::vector<double>> points{seed.location};
  std::size_t failures = 0;
  const std::size_t allowed = hopts.retries_per_point * std::max<std::size_t>(count, 1);
  while (points.size() < count + 1) {
    if (failures > allowed) throw HarvestError("kink lost on too many perturbed lines");
    const auto offset = random_in_ball(rng, n, radius);
    Line line{seed.location, seed.line.direction};
    for (std::size_t v = 0; v < n; ++v) line.base[v] += offset[v];
    const auto scan = detect_kinks_on_line(oracle, line, -2.0 * radius, 2.0 * radius, hopts.grid, opts);
    const KinkPoint* best = nullptr;
    for (const auto& k : scan.kinks) {
      if (!best || std::abs(k.t) < std::abs(best->t)) best = &k;
    }
    if (!best) {
      ++failures;
      continue;
    }
    double dist2 = 0.0;
    for (std::size_t v = 0; v < n; ++v) dist2 += (best->location[v] - seed.location[v]) * (best->location[v] - seed.location[v]);
    if (std::sqrt(dist2) > 2.0 * radius) {
      ++failures;
      continue;
    }
    points.push_back(best->location);
  }
  return points;
}

}  // namespace losscarto
