#pragma once

// Fitting the polynomial piece of a black-box loss around a point, and
// reading a training-input direction off the difference of two pieces fitted
// on either side of a wall.

#include <Eigen/Dense>

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <vector>

#include "losscarto/errors.hpp"
#include "losscarto/hyperplane.hpp"
#include "losscarto/kinks.hpp"
#include "losscarto/network.hpp"
#include "losscarto/oracle.hpp"
#include "losscarto/poly.hpp"
#include "losscarto/random.hpp"

namespace losscarto {

/// C(n + d, d), saturating at a large value.
inline std::uint64_t monomial_count(std::size_t n, std::size_t d) {
  long double r = 1;
  for (std::size_t i = 1; i <= d; ++i) r = r * static_cast<long double>(n + i) / static_cast<long double>(i);
  return r > 1e18L ? std::uint64_t{1000000000000000000ULL} : static_cast<std::uint64_t>(std::llround(r));
}

/// Every exponent pattern over n variables with total degree <= d, in
/// canonical (graded-lex descending) order.
inline std::vector<Monomial> monomials_up_to(std::size_t n, std::size_t d) {
  std::vector<Monomial> out;
  std::vector<Monomial::Factor> current;
  auto rec = [&](auto&& self, std::size_t var, std::size_t left) -> void {
    if (var == n) {
      out.push_back(Monomial::from_factors(current));
      return;
    }
    for (std::size_t e = 0; e <= left; ++e) {
      if (e > 0) current.emplace_back(static_cast<Var>(var), static_cast<std::uint32_t>(e));
      self(self, var + 1, left - e);
      if (e > 0) current.pop_back();
    }
  };
  rec(rec, 0, d);
  std::sort(out.begin(), out.end(), CanonicalOrder{});
  return out;
}

struct RegionFitOptions {
  /// Sampling points = sample_factor * monomial count.
  std::size_t sample_factor = 2;
  std::uint64_t monomial_cap = 5000;
  /// Relative RMS residual above which the ball is taken to straddle a wall.
  double residual_threshold = 1e-6;
  std::size_t prescan_lines = 2;
  std::size_t prescan_grid = 16;
  std::uint64_t seed = 0;
};

struct RegionFit {
  FloatPoly poly;
  /// RMS fit residual divided by the largest |E| in the sample.
  double residual = 0.0;
};

/// Least-squares fit of E over random points of the ball (center, radius)
/// in the monomial basis of degree <= degree_bound. The fit is done in
/// scaled local coordinates and expanded back into weight coordinates.
inline RegionFit fit_region_polynomial(const LossOracle& oracle, std::span<const double> center,
                                       std::size_t degree_bound, double radius, const RegionFitOptions& opts = {},
                                       const KinkOptions& kopts = {}) {
  const std::size_t n = oracle.dimension();
  if (center.size() != n) throw ShapeError("center dimension does not match the oracle");
  if (!(radius > 0)) throw ValidationError("fit radius must be positive");
  const std::uint64_t count = monomial_count(n, degree_bound);
  if (count > opts.monomial_cap) throw BudgetError("monomial basis exceeds the configured cap");

  auto rng = make_stream(opts.seed, 0x7265676966ULL);
  KinkOptions scan_opts = kopts;
  scan_opts.degree = degree_bound;
  for (std::size_t l = 0; l < opts.prescan_lines; ++l) {
    Line line{std::vector<double>(center.begin(), center.end()), random_unit_vector(rng, n)};
    const auto scan = detect_kinks_on_line(oracle, line, -radius, radius,
                                           std::max(opts.prescan_grid, degree_bound + 3), scan_opts);
    if (!scan.kinks.empty()) throw ContaminationError("sampling ball crosses a kink");
  }

  const auto basis = monomials_up_to(n, degree_bound);
  const std::size_t rows = opts.sample_factor * basis.size();
  Eigen::MatrixXd A(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(basis.size()));
  Eigen::VectorXd y(static_cast<Eigen::Index>(rows));
  std::vector<double> w(n);
  double scale = 0.0;
  for (std::size_t r = 0; r < rows; ++r) {
    const auto local = random_in_ball(rng, n, 1.0);
    for (std::size_t v = 0; v < n; ++v) w[v] = center[v] + radius * local[v];
    y(static_cast<Eigen::Index>(r)) = oracle(w);
    scale = std::max(scale, std::abs(y(static_cast<Eigen::Index>(r))));
    for (std::size_t c = 0; c < basis.size(); ++c) {
      double m = 1.0;
      for (const auto& [v, e] : basis[c].factors()) m *= std::pow(local[v], static_cast<int>(e));
      A(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = m;
    }
  }
  RegionFit fit;
  if (scale == 0.0) return fit;
  const Eigen::VectorXd x = A.colPivHouseholderQr().solve(y);
  fit.residual = std::sqrt((A * x - y).squaredNorm() / static_cast<double>(rows)) / scale;
  if (fit.residual > opts.residual_threshold) {
    throw ContaminationError("region fit residual too large; the ball crosses a wall");
  }

  std::vector<Term<double>> local_terms;
  for (std::size_t c = 0; c < basis.size(); ++c) local_terms.push_back({basis[c], x(static_cast<Eigen::Index>(c))});
  const FloatPoly local = FloatPoly::from_terms(std::move(local_terms));
  std::vector<FloatPoly> images;
  images.reserve(n);
  for (std::size_t v = 0; v < n; ++v) {
    images.push_back(FloatPoly::variable(static_cast<Var>(v), 1.0 / radius) + FloatPoly::constant(-center[v] / radius));
  }
  fit.poly = pruned(compose(local, images), 1e-10 * scale);
  return fit;
}

struct DifferenceDirection {
  bool linear = false;
  /// Largest coefficient of f - g after thresholding.
  double magnitude = 0.0;
  /// Unit normal over the candidate variables, in flat coordinates.
  std::vector<double> normal;
  /// Classification of the normal (only with a shape).
  std::optional<InputCandidate> candidate;
};

/// Looks for a linear factor of f - g. Variables outside the first weight
/// layer are frozen at `at`; the degree-one part of what remains is the
/// candidate wall, accepted when f - g vanishes on its zero set. Without a
/// shape every variable is a candidate and no classification is attempted.
/// Coefficients of f - g below noise_tol times the largest coefficient of f
/// or g are dropped first.
inline DifferenceDirection region_difference_direction(const FloatPoly& f, const FloatPoly& g,
                                                       const std::optional<NetworkShape>& shape,
                                                       std::span<const double> at, double support_tol = 1e-4,
                                                       double noise_tol = 1e-7) {
  DifferenceDirection out;
  const double scale = std::max(max_abs_coefficient(f), max_abs_coefficient(g));
  const FloatPoly h = pruned(f - g, noise_tol * scale);
  out.magnitude = max_abs_coefficient(h);
  if (h.is_zero()) return out;

  const std::size_t n = shape ? shape->weight_count() : at.size();
  if (at.size() != n) throw ShapeError("specialization point has the wrong dimension");
  std::vector<bool> candidate(n, true);
  if (shape) {
    for (std::size_t v = 0; v < n; ++v) candidate[v] = shape->layer_of(v) == 1;
  }
  std::vector<FloatPoly> images(n);
  for (std::size_t v = 0; v < n; ++v) {
    images[v] = candidate[v] ? FloatPoly::variable(static_cast<Var>(v)) : FloatPoly::constant(at[v]);
  }
  const FloatPoly hs = compose(h, images);
  const FloatPoly lin = hs.homogeneous_component(1);
  if (max_abs_coefficient(lin) <= support_tol * max_abs_coefficient(hs)) return out;

  out.normal.assign(n, 0.0);
  double norm = 0.0;
  for (const auto& t : lin.terms()) {
    out.normal[t.monomial.factors().front().first] = t.coeff;
    norm += t.coeff * t.coeff;
  }
  norm = std::sqrt(norm);
  for (auto& x : out.normal) x /= norm;

  // f - g must vanish on {normal . w = 0} within the candidate variables.
  auto rng = make_stream(0x646966ULL);
  double on_plane = 0.0;
  double generic = 0.0;
  for (int trial = 0; trial < 8; ++trial) {
    std::vector<double> p(n, 0.0);
    double dot = 0.0;
    for (std::size_t v = 0; v < n; ++v) {
      if (candidate[v]) p[v] = standard_normal(rng);
      dot += p[v] * out.normal[v];
    }
    generic = std::max(generic, std::abs(hs.evaluate<double>(p)));
    for (std::size_t v = 0; v < n; ++v) p[v] -= dot * out.normal[v];
    on_plane = std::max(on_plane, std::abs(hs.evaluate<double>(p)));
  }
  if (!(generic > 0) || on_plane > 1e-6 * generic) return out;

  out.linear = true;
  if (shape) out.candidate = extract_input_direction(out.normal, *shape, support_tol);
  return out;
}

}  // namespace losscarto
