#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

#include "support.hpp"

using namespace lc_test;

namespace {

const NetworkShape kWarmShape({2, 1, 1});

std::vector<Sample> warm_samples() { return {{{1, 2}, {0}}, {{3, 1}, {0}}}; }

std::unique_ptr<LossOracle> warm_line() {
  return make_line_oracle(kWarmShape, warm_samples(), {0, 1, 1}, {-1, 0, 0});
}

const Line kUnitLine{{0.0}, {1.0}};

double coefficient(const FloatPoly& p, const Monomial& m) {
  for (const auto& t : p.terms()) {
    if (t.monomial == m) return t.coeff;
  }
  return 0.0;
}

double max_coefficient_gap(const FloatPoly& a, const FloatPoly& b) { return max_abs_coefficient(a - b); }

/// Weights of [2,2,1] with the first hidden pre-output equal to z1 for input
/// (3, 4) and the second equal to 7.
std::vector<double> two_layer_center(double z1) {
  return {z1 * 3.0 / 25.0, z1 * 4.0 / 25.0, 1.0, 1.0, 1.0, 0.5};
}

}  // namespace

TEST(Kinks, WarmupLocations) {
  const auto oracle = warm_line();
  const auto scan = detect_kinks_on_line(*oracle, kUnitLine, 0.0, 3.0, 64);
  ASSERT_EQ(scan.kinks.size(), 2u);
  EXPECT_NEAR(scan.kinks[0].t, 1.0 / 3.0, 1e-6);
  EXPECT_NEAR(scan.kinks[1].t, 2.0, 1e-6);
  EXPECT_LT(oracle->query_count(), 1000u);
}

TEST(Kinks, PolynomialOracleHasNone) {
  LossOracle quad(3, [](std::span<const double> w) { return w[0] * w[0] + 3 * w[1] * w[2] - w[2] + 1; });
  const Line line{{0.1, -0.2, 0.3}, {1.0, 0.5, -2.0}};
  const auto scan = detect_kinks_on_line(quad, line, -4.0, 4.0, 40);
  EXPECT_TRUE(scan.kinks.empty());
  EXPECT_TRUE(scan.rejected.empty());
  LossOracle lin(2, [](std::span<const double> w) { return 2 * w[0] - w[1]; });
  EXPECT_TRUE(detect_kinks_on_line(lin, Line{{0, 0}, {1, 1}}, -1, 1, 16).kinks.empty());
}

TEST(Kinks, TwoLayerNetMatchesExactWallRoots) {
  const NetworkShape shape({2, 2, 1});
  const std::vector<Sample> samples{{{3, -5}, {1}}};
  auto rng = make_stream(101);
  for (int trial = 0; trial < 10; ++trial) {
    std::vector<double> base(6), dir(6);
    for (auto& x : base) x = uniform_dyadic(rng);
    for (auto& x : dir) x = uniform_dyadic(rng);
    const auto oracle = make_loss_oracle(shape, samples);
    const auto scan = detect_kinks_on_line(*oracle, Line{base, dir}, -3.0, 3.0, 96);
    // Each pre-output is linear in t; its root is the exact crossing.
    std::vector<double> roots;
    for (std::size_t j = 1; j <= 2; ++j) {
      const auto i1 = shape.index_of(1, 1, j);
      const auto i2 = shape.index_of(1, 2, j);
      const double z0 = 3 * base[i1] - 5 * base[i2];
      const double dz = 3 * dir[i1] - 5 * dir[i2];
      const double t = -z0 / dz;
      if (t > -2.9 && t < 2.9 && base[shape.index_of(2, j, 1)] + t * dir[shape.index_of(2, j, 1)] != 0) {
        roots.push_back(t);
      }
    }
    std::sort(roots.begin(), roots.end());
    if (roots.size() == 2 && roots[1] - roots[0] < 0.5) continue;  // closer than the grid resolves
    ASSERT_EQ(scan.kinks.size(), roots.size());
    for (std::size_t r = 0; r < roots.size(); ++r) EXPECT_NEAR(scan.kinks[r].t, roots[r], 1e-8);
  }
}

TEST(Kinks, RefineBracket) {
  const auto oracle = warm_line();
  const auto k = refine_kink(*oracle, kUnitLine, 1.9, 2.1);
  EXPECT_NEAR(k.t, 2.0, 1e-9);
  EXPECT_NEAR(k.location[0], 2.0, 1e-9);
  EXPECT_GT(k.jump_magnitude, 0.0);
  // Both one-sided samplings stay between the two kinks.
  EXPECT_THROW(refine_kink(*oracle, kUnitLine, 1.0, 1.1), SpuriousKinkError);
  EXPECT_THROW(refine_kink(*oracle, kUnitLine, 1.0, 1.0), ValidationError);
}

TEST(Kinks, RejectsBadScans) {
  const auto oracle = warm_line();
  EXPECT_THROW(detect_kinks_on_line(*oracle, kUnitLine, 0, 3, 7), ValidationError);
  EXPECT_THROW(detect_kinks_on_line(*oracle, Line{{0.0}, {0.0}}, 0, 3, 16), ValidationError);
  EXPECT_THROW(detect_kinks_on_line(*oracle, Line{{0.0, 0.0}, {1.0, 0.0}}, 0, 3, 16), ShapeError);
}

TEST(Kinks, BudgetIsEnforced) {
  const auto oracle = make_line_oracle(kWarmShape, warm_samples(), {0, 1, 1}, {-1, 0, 0}, 10);
  EXPECT_THROW(detect_kinks_on_line(*oracle, kUnitLine, 0, 3, 64), OracleBudgetExhausted);
  EXPECT_EQ(oracle->query_count(), 10u);
}

TEST(Harvest, PlantedHyperplane) {
  const std::vector<double> n{1.0, 2.0, -1.0, 0.5};
  LossOracle oracle(4, [&](std::span<const double> w) {
    double d = 0.0, s = 0.0;
    for (std::size_t i = 0; i < 4; ++i) {
      d += n[i] * w[i];
      s += w[i] * w[i];
    }
    return std::abs(d) + 0.5 * s;
  });
  const Line line{{0.2, -0.1, 0.3, 0.4}, {1.0, 0.0, 0.0, 0.0}};
  const auto scan = detect_kinks_on_line(oracle, line, -2.0, 2.0, 48);
  ASSERT_EQ(scan.kinks.size(), 1u);
  auto rng = make_stream(7);
  const auto points = harvest_sheet_points(oracle, scan.kinks[0], 8, 0.1, rng);
  ASSERT_EQ(points.size(), 9u);
  for (const auto& p : points) {
    double d = 0.0;
    for (std::size_t i = 0; i < 4; ++i) d += n[i] * p[i];
    EXPECT_LE(std::abs(d), 1e-7);
  }
  const auto fit = fit_hyperplane(points);
  std::vector<double> unit = n;
  EXPECT_GE(abs_cosine(fit.normal, unit), 1.0 - 1e-9);
  EXPECT_THROW(harvest_sheet_points(oracle, scan.kinks[0], 2, 0.0, rng), ValidationError);
}

TEST(Harvest, OneDimensional) {
  LossOracle oracle(1, [](std::span<const double> a) { return std::abs(a[0] - 1.0); });
  const auto scan = detect_kinks_on_line(oracle, kUnitLine, 0.0, 3.0, 32);
  ASSERT_EQ(scan.kinks.size(), 1u);
  auto rng = make_stream(8);
  const auto points = harvest_sheet_points(oracle, scan.kinks[0], 1, 0.1, rng);
  ASSERT_EQ(points.size(), 2u);
  EXPECT_NEAR(points[1][0], 1.0, 1e-9);
}

TEST(Harvest, NoKinkNearbyFails) {
  LossOracle oracle(2, [](std::span<const double> w) { return w[0] * w[0] + w[1]; });
  KinkPoint fake;
  fake.location = {0.0, 0.0};
  fake.line = Line{{0.0, 0.0}, {1.0, 0.0}};
  auto rng = make_stream(9);
  EXPECT_THROW(harvest_sheet_points(oracle, fake, 3, 0.1, rng), HarvestError);
}

TEST(Hyperplane, Examples) {
  const std::vector<std::vector<double>> pts{{0, 0}, {1, -0.5}, {2, -1}};
  const auto fit = fit_hyperplane(pts);
  EXPECT_NEAR(fit.normal[0], 1.0 / std::sqrt(5.0), 1e-12);
  EXPECT_NEAR(fit.normal[1], 2.0 / std::sqrt(5.0), 1e-12);
  EXPECT_NEAR(fit.residual, 0.0, 1e-15);
  EXPECT_THROW(fit_hyperplane(std::vector<std::vector<double>>{{1, 1}, {1, 1}, {1, 1}}), DegeneracyError);
  EXPECT_THROW(fit_hyperplane(std::vector<std::vector<double>>{{1, 1}, {2, 1}}), DegeneracyError);
  EXPECT_THROW(fit_hyperplane(std::vector<std::vector<double>>{}), DegeneracyError);
}

TEST(Hyperplane, FirstLayerSheetOfTwoLayerNet) {
  const NetworkShape shape({2, 2, 1});
  auto rng = make_stream(13);
  std::vector<std::vector<double>> pts;
  for (int p = 0; p < 9; ++p) {
    std::vector<double> w(6);
    for (auto& x : w) x = standard_normal(rng);
    w[1] = -3.0 * w[0] / 4.0;  // 3 w(1,1->1) + 4 w(1,2->1) = 0
    pts.push_back(w);
  }
  const auto fit = fit_hyperplane(pts);
  EXPECT_LE(fit.residual, 1e-12);
  const auto cand = extract_input_direction(fit.normal, shape);
  ASSERT_EQ(cand.kind, SheetKind::FirstLayer);
  EXPECT_EQ(cand.target, 1u);
  EXPECT_NEAR(cand.direction[0], 0.6, 1e-9);
  EXPECT_NEAR(cand.direction[1], 0.8, 1e-9);
}

TEST(Hyperplane, ResidualShrinksOnCurvedSheet) {
  // Kinks on the parabola w1 = w0^2; the flat fit error is second order.
  LossOracle oracle(2, [](std::span<const double> w) { return std::abs(w[1] - w[0] * w[0]) + 0.25 * w[0]; });
  const auto scan = detect_kinks_on_line(oracle, Line{{0.3, 0.0}, {0.0, 1.0}}, -1.0, 1.0, 40);
  ASSERT_EQ(scan.kinks.size(), 1u);
  EXPECT_NEAR(scan.kinks[0].t, 0.09, 1e-9);
  auto rng = make_stream(17);
  const auto wide = fit_hyperplane(harvest_sheet_points(oracle, scan.kinks[0], 40, 0.1, rng));
  const auto narrow = fit_hyperplane(harvest_sheet_points(oracle, scan.kinks[0], 40, 0.05, rng));
  ASSERT_GT(wide.residual, 0.0);
  EXPECT_LE(narrow.residual / wide.residual, 0.6);
}

TEST(InputDirection, Classification) {
  const NetworkShape shape({2, 2, 1});
  std::vector<double> e5(6, 0.0);
  e5[5] = 1.0;
  auto c = extract_input_direction(e5, shape);
  EXPECT_EQ(c.kind, SheetKind::WeightParameter);
  EXPECT_EQ(c.weight, 5u);
  EXPECT_FALSE(c.possible_one_hot);

  std::vector<double> e2(6, 0.0);
  e2[2] = -2.0;
  c = extract_input_direction(e2, shape);
  EXPECT_EQ(c.kind, SheetKind::WeightParameter);
  EXPECT_TRUE(c.possible_one_hot);

  c = extract_input_direction(std::vector<double>{-15, -20, 0, 0, 0, 0}, shape);
  ASSERT_EQ(c.kind, SheetKind::FirstLayer);
  EXPECT_NEAR(c.direction[0], 0.6, 1e-12);
  EXPECT_NEAR(c.direction[1], 0.8, 1e-12);

  EXPECT_EQ(extract_input_direction(std::vector<double>{1, 0, 0, 0, 1, 0}, shape).kind, SheetKind::Nonlinear);
  EXPECT_EQ(extract_input_direction(std::vector<double>{1, 0, 1, 0, 0, 0}, shape).kind, SheetKind::Nonlinear);
  // Entries below the support cut are ignored.
  c = extract_input_direction(std::vector<double>{0, 0, 3, 4, 1e-9, 0}, shape);
  EXPECT_EQ(c.kind, SheetKind::FirstLayer);
  EXPECT_EQ(c.target, 2u);
}

TEST(RegionFit, MonomialBasis) {
  EXPECT_EQ(monomial_count(6, 4), 210u);
  EXPECT_EQ(monomial_count(1, 2), 3u);
  const auto basis = monomials_up_to(2, 2);
  ASSERT_EQ(basis.size(), 6u);
  EXPECT_TRUE(std::is_sorted(basis.begin(), basis.end(), CanonicalOrder{}));
  EXPECT_TRUE(basis.back().is_one());
}

TEST(RegionFit, OneDimensionalPiece) {
  const auto oracle = warm_line();
  const std::vector<double> center{1.0};
  const auto fit = fit_region_polynomial(*oracle, center, 2, 0.3);
  // 1/2 (2 - a)^2; the second sample is dead for a > 1/3.
  EXPECT_NEAR(coefficient(fit.poly, Monomial{}), 2.0, 1e-8);
  EXPECT_NEAR(coefficient(fit.poly, Monomial::variable(0)), -2.0, 1e-8);
  EXPECT_NEAR(coefficient(fit.poly, Monomial::variable(0, 2)), 0.5, 1e-8);
  EXPECT_LE(fit.residual, 1e-10);

  const auto dead = fit_region_polynomial(*oracle, std::vector<double>{2.5}, 2, 0.3);
  EXPECT_TRUE(dead.poly.is_zero());
}

TEST(RegionFit, TwoLayerNetAllActive) {
  const NetworkShape shape({2, 2, 1});
  const std::vector<Sample> samples{{{1, 1}, {0}}, {{1, 2}, {1}}};
  const auto oracle = make_loss_oracle(shape, samples);
  const std::vector<double> center{1.0, 1.0, 1.0, 1.0, 1.0, 0.5};
  const auto fit = fit_region_polynomial(*oracle, center, 4, 0.1);
  const auto exact = to_exact(std::span<const Sample>(samples));
  const auto region = region_of(shape, exact, std::span<const Rational>(to_rational(std::span<const double>(center))));
  const FloatPoly truth = to_float(region_loss_polynomial(shape, exact, region));
  EXPECT_LE(max_coefficient_gap(fit.poly, truth), 1e-5 * max_abs_coefficient(truth));
}

TEST(RegionFit, Contamination) {
  const auto oracle = warm_line();
  EXPECT_THROW(fit_region_polynomial(*oracle, std::vector<double>{2.0}, 2, 0.3), ContaminationError);
  const NetworkShape shape({2, 2, 1});
  const auto net = make_loss_oracle(shape, {{{3, 4}, {1}}});
  RegionFitOptions opts;
  opts.prescan_lines = 0;  // leave it to the residual test
  EXPECT_THROW(fit_region_polynomial(*net, two_layer_center(0.0), 4, 0.1, opts), ContaminationError);
  opts.monomial_cap = 100;
  EXPECT_THROW(fit_region_polynomial(*net, two_layer_center(1.0), 4, 0.1, opts), BudgetError);
  EXPECT_THROW(fit_region_polynomial(*net, std::vector<double>{1.0}, 4, 0.1), ShapeError);
}

TEST(RegionDifference, OneDimensionalIsNotLinear) {
  const auto oracle = warm_line();
  const auto f = fit_region_polynomial(*oracle, std::vector<double>{1.0}, 2, 0.3);
  const auto d = region_difference_direction(f.poly, FloatPoly(), std::nullopt, std::vector<double>{1.0});
  EXPECT_FALSE(d.linear);
  EXPECT_GT(d.magnitude, 0.0);
}

TEST(RegionDifference, AcrossSecondLayerWall) {
  const NetworkShape shape({2, 2, 1});
  const auto oracle = make_loss_oracle(shape, {{{3, 4}, {1}}});
  const auto plus = two_layer_center(1.0);
  const auto minus = two_layer_center(-1.0);
  const auto f = fit_region_polynomial(*oracle, plus, 4, 0.05);
  const auto g = fit_region_polynomial(*oracle, minus, 4, 0.05);
  const auto d = region_difference_direction(f.poly, g.poly, shape, plus);
  ASSERT_TRUE(d.linear);
  ASSERT_TRUE(d.candidate);
  ASSERT_EQ(d.candidate->kind, SheetKind::FirstLayer);
  EXPECT_EQ(d.candidate->target, 1u);
  EXPECT_GE(abs_cosine(d.candidate->direction, std::vector<double>{3, 4}), 0.999);

  const auto same = region_difference_direction(f.poly, f.poly, shape, plus);
  EXPECT_FALSE(same.linear);
  EXPECT_EQ(same.magnitude, 0.0);
}
