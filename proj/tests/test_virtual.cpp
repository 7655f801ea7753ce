#include <gtest/gtest.h>

#include <algorithm>

#include "support.hpp"

using namespace lc_test;

namespace {

const Rational kX1 = q(3);
const Rational kX2 = q(5);

Poly c(const Rational& r) { return Poly::constant(r); }

/// omega_1..omega_6 on [2,2,1] (or the first six weights of the deeper net).
struct Omegas {
  Poly o1, o2, o3, o4, o5, o6;
  explicit Omegas(const NetworkShape& s)
      : o1(w(s, 1, 1, 1)), o2(w(s, 1, 1, 2)), o3(w(s, 1, 2, 1)), o4(w(s, 1, 2, 2)), o5(w(s, 2, 1, 1)), o6(w(s, 2, 2, 1)) {}
  Poly full() const { return o1 * o5 * c(kX1) + o2 * o6 * c(kX1) + o3 * o5 * c(kX2) + o4 * o6 * c(kX2); }
};

/// Masked linear forward pass at a numeric weight point: an independent
/// evaluation of the virtual polynomial.
Rational masked_forward(const NetworkShape& shape, const std::vector<Rational>& weights,
                        const std::vector<Rational>& input, const ActivationSet& set, NodeId node) {
  std::vector<Rational> x = input;
  for (std::size_t k = 1; k < node.layer; ++k) {
    std::vector<Rational> z(shape.width(k + 1), q(0));
    for (std::size_t j = 1; j <= shape.width(k + 1); ++j) {
      for (std::size_t i = 1; i <= shape.width(k); ++i) z[j - 1] += weights[shape.index_of(k, i, j)] * x[i - 1];
    }
    if (k + 1 == node.layer) return z[node.node - 1];
    for (std::size_t j = 1; j <= z.size(); ++j) {
      if (!set.active(k + 1, j)) z[j - 1] = 0;
    }
    x = z;
  }
  return input[node.node - 1];
}

ActivationSet random_set(std::mt19937_64& rng, const std::vector<std::size_t>& widths) {
  ActivationSet s(widths);
  for (std::size_t slot = 0; slot < s.hidden_count(); ++slot) {
    const auto [k, i] = s.node_of_slot(slot);
    s.set(k, i, (rng() & 3U) != 0);
  }
  return s;
}

NetworkShape random_small_shape(std::mt19937_64& rng) {
  std::uniform_int_distribution<std::size_t> layers(3, 4);
  std::uniform_int_distribution<std::size_t> width(1, 3);
  std::vector<std::size_t> widths;
  const std::size_t L = layers(rng);
  for (std::size_t k = 0; k < L; ++k) widths.push_back(width(rng));
  widths.back() = std::min<std::size_t>(widths.back(), 2);
  return NetworkShape(widths);
}

/// Per-layer exponent sums of one monomial, counted without the library's
/// degree helper.
std::vector<std::size_t> layer_counts(const Monomial& m, const NetworkShape& shape) {
  std::vector<std::size_t> out(shape.weight_layers(), 0);
  for (const auto& [v, e] : m.factors()) {
    std::size_t k = 1;
    while (k < shape.weight_layers() && v >= shape.layer_offset(k + 1)) ++k;
    out[k - 1] += e;
  }
  return out;
}

}  // namespace

TEST(VirtualPolynomial, TwoLayerExamples) {
  const NetworkShape shape({2, 2, 1});
  const Omegas o(shape);
  const std::vector<Rational> x{kX1, kX2};
  auto set = ActivationSet::all_active(shape.widths());
  EXPECT_EQ(virtual_polynomial(shape, x, set, {1, 3}).poly, o.full());
  set.set(2, 2, false);
  EXPECT_EQ(virtual_polynomial(shape, x, set, {1, 3}).poly, o.o1 * o.o5 * c(kX1) + o.o3 * o.o5 * c(kX2));
  EXPECT_TRUE(virtual_polynomial(shape, x, ActivationSet::all_negative(shape.widths()), {1, 3}).poly.is_zero());
}

TEST(VirtualPolynomial, TwoLayerEnumeration) {
  const NetworkShape shape({2, 2, 1});
  const Omegas o(shape);
  const auto found = enumerate_virtual_polynomials(shape, std::vector<Rational>{kX1, kX2}, {1, 3});
  std::vector<Poly> expected{o.full(), o.o1 * o.o5 * c(kX1) + o.o3 * o.o5 * c(kX2),
                             o.o2 * o.o6 * c(kX1) + o.o4 * o.o6 * c(kX2), Poly()};
  ASSERT_EQ(found.size(), expected.size());
  for (const auto& e : expected) {
    EXPECT_EQ(std::count_if(found.begin(), found.end(), [&](const auto& f) { return f.poly == e; }), 1);
  }
  // Each witness reproduces its polynomial.
  for (const auto& f : found) {
    EXPECT_EQ(virtual_polynomial(shape, std::vector<Rational>{kX1, kX2}, f.witness, {1, 3}).poly, f.poly);
  }
}

TEST(VirtualPolynomial, EnumerationSmallCases) {
  const NetworkShape chain({1, 1, 2});
  EXPECT_EQ(enumerate_virtual_polynomials(chain, qs({2}), {1, 3}).size(), 2u);
  const NetworkShape shape({3, 2, 2, 1});
  const auto a = qs({1, -2, 3});
  for (std::size_t i = 1; i <= 2; ++i) {
    const auto found = enumerate_virtual_polynomials(shape, a, {i, 2});
    ASSERT_EQ(found.size(), 1u);
    const Poly expected = c(a[0]) * w(shape, 1, 1, i) + c(a[1]) * w(shape, 1, 2, i) + c(a[2]) * w(shape, 1, 3, i);
    EXPECT_EQ(found.front().poly, expected);
  }
}

TEST(VirtualPolynomial, EnumerationCap) {
  const NetworkShape shape({2, 5, 5, 1});
  EXPECT_THROW(enumerate_virtual_polynomials(shape, qs({1, 1}), {1, 4}, 8), BudgetError);
  EXPECT_NO_THROW(enumerate_virtual_polynomials(shape, qs({1, 1}), {1, 3}, 8));
}

TEST(VirtualPolynomial, InputLayerNodeIsTheInputValue) {
  const NetworkShape shape({2, 2, 1});
  EXPECT_EQ(virtual_polynomial(shape, qs({7, 9}), ActivationSet::all_active(shape.widths()), {2, 1}).poly, c(q(9)));
}

TEST(VirtualPolynomial, NonUniqueWitnesses) {
  const NetworkShape shape({2, 2, 2, 1});
  const auto a = qs({1, 2});
  auto s1 = ActivationSet::all_negative(shape.widths());
  auto s2 = s1;
  s2.set(3, 1, true);  // layer 2 dead already, so layer 3 flags do not matter
  EXPECT_NE(s1, s2);
  EXPECT_EQ(virtual_polynomial(shape, a, s1, {1, 4}).poly, virtual_polynomial(shape, a, s2, {1, 4}).poly);
  EXPECT_TRUE(virtual_polynomial(shape, a, s1, {1, 4}).poly.is_zero());
}

TEST(VirtualPolynomial, AgreesWithMaskedForwardPass) {
  auto rng = make_stream(41);
  for (int trial = 0; trial < 100; ++trial) {
    const NetworkShape shape = random_small_shape(rng);
    const auto set = random_set(rng, shape.widths());
    const auto a = random_point(rng, shape.input_width());
    const auto weights = random_point(rng, shape.weight_count());
    for (std::size_t k = 2; k <= shape.layers(); ++k) {
      for (std::size_t i = 1; i <= shape.width(k); ++i) {
        const Poly p = virtual_polynomial(shape, a, set, {i, k}).poly;
        EXPECT_EQ(p.evaluate<Rational>(weights), masked_forward(shape, weights, a, set, {i, k}));
      }
    }
  }
}

TEST(VirtualPolynomial, LayerwiseHomogeneity) {
  auto rng = make_stream(43);
  std::size_t nonzero = 0;
  for (int trial = 0; trial < 200; ++trial) {
    const NetworkShape shape = random_small_shape(rng);
    const auto set = random_set(rng, shape.widths());
    const auto a = random_point(rng, shape.input_width());
    for (std::size_t k = 2; k <= shape.layers(); ++k) {
      for (std::size_t i = 1; i <= shape.width(k); ++i) {
        const Poly p = virtual_polynomial(shape, a, set, {i, k}).poly;
        if (p.is_zero()) continue;
        ++nonzero;
        std::vector<std::size_t> expected(shape.weight_layers(), 0);
        std::fill(expected.begin(), expected.begin() + static_cast<long>(k - 1), 1);
        for (const auto& t : p.terms()) EXPECT_EQ(layer_counts(t.monomial, shape), expected);
        const auto d = layerwise_degree(p, shape);
        ASSERT_TRUE(d);
        EXPECT_EQ(d->entries, expected);
      }
    }
  }
  EXPECT_GT(nonzero, 200u);
}

TEST(ActiveNetwork, Examples) {
  const NetworkShape shape({2, 2, 2, 1});
  const auto full = p_active_network(shape, ActivationSet::all_active(shape.widths()));
  EXPECT_EQ(full.nodes[1].size(), 2u);
  std::size_t edges = 0;
  for (const auto& e : full.edges) edges += e.size();
  EXPECT_EQ(edges, shape.weight_count());

  const auto dead = p_active_network(shape, ActivationSet::all_negative(shape.widths()));
  EXPECT_EQ(dead.nodes[0].size(), 2u);
  EXPECT_TRUE(dead.nodes[1].empty());
  EXPECT_TRUE(dead.nodes[2].empty());
  EXPECT_EQ(dead.nodes[3].size(), 1u);
  for (const auto& e : dead.edges) EXPECT_TRUE(e.empty());
  const auto report = bottleneck_layers(dead);
  EXPECT_TRUE(report.bottlenecks.empty());
  EXPECT_EQ(report.dead_cuts, (std::vector<std::size_t>{2, 3}));
}

TEST(ActiveNetwork, Bottlenecks) {
  const NetworkShape fig2({2, 2, 1});
  EXPECT_EQ(bottleneck_layers(p_active_network(fig2, ActivationSet::all_active(fig2.widths()))).bottlenecks,
            (std::vector<std::size_t>{3}));
  const NetworkShape fig3({2, 2, 2, 2, 1});
  auto set = ActivationSet::all_active(fig3.widths());
  set.set(3, 2, false);
  const auto sub = p_active_network(fig3, set);
  EXPECT_EQ(sub.nodes[2], (std::vector<std::size_t>{1}));
  EXPECT_EQ(bottleneck_layers(sub).bottlenecks, (std::vector<std::size_t>{3, 5}));
  for (const auto& e : sub.edges[1]) EXPECT_EQ(e.target, 1u);
  for (const auto& e : sub.edges[2]) EXPECT_EQ(e.source, 1u);
}

TEST(Factorize, DeepNet) {
  const NetworkShape shape({2, 2, 2, 2, 1});
  const Omegas o(shape);
  const Poly o7 = w(shape, 3, 1, 1), o8 = w(shape, 3, 1, 2), o9 = w(shape, 4, 1, 1), o10 = w(shape, 4, 2, 1);
  auto set = ActivationSet::all_active(shape.widths());
  set.set(3, 2, false);
  const auto f = factorize(shape, std::vector<Rational>{kX1, kX2}, set, {1, 5});
  ASSERT_EQ(f.factors.size(), 2u);
  EXPECT_EQ(f.factors[0].poly, o.full());
  EXPECT_EQ(f.factors[1].poly, o7 * o9 + o8 * o10);
  EXPECT_EQ(f.factors[0].poly * f.factors[1].poly, f.product);
  EXPECT_EQ(f.product, o.full() * (o7 * o9 + o8 * o10));
  EXPECT_EQ(f.factors[0].to, (NodeId{1, 3}));
  EXPECT_EQ(f.factors[1].from, (NodeId{1, 3}));
}

TEST(Factorize, NoInteriorBottleneck) {
  const NetworkShape shape({2, 2, 1});
  const Omegas o(shape);
  const auto f = factorize(shape, std::vector<Rational>{kX1, kX2}, ActivationSet::all_active(shape.widths()), {1, 3});
  ASSERT_EQ(f.factors.size(), 1u);
  EXPECT_EQ(f.factors[0].poly, o.full());
}

TEST(Factorize, Chain) {
  const NetworkShape shape({1, 1, 1});
  const auto f = factorize(shape, qs({7}), ActivationSet::all_active(shape.widths()), {1, 3});
  ASSERT_EQ(f.factors.size(), 2u);
  EXPECT_EQ(f.factors[0].poly, c(q(7)) * Poly::variable(0));
  EXPECT_EQ(f.factors[1].poly, Poly::variable(1));
}

TEST(Factorize, ZeroPolynomialRefused) {
  const NetworkShape shape({2, 2, 1});
  EXPECT_THROW(factorize(shape, qs({1, 1}), ActivationSet::all_negative(shape.widths()), {1, 3}),
               ZeroPolynomialError);
}

TEST(Factorize, IdentityCountAndLinearFactors) {
  auto rng = make_stream(47);
  std::size_t multi = 0;
  for (int trial = 0; trial < 150; ++trial) {
    const NetworkShape shape({3, 3, 3, 2});
    auto set = ActivationSet::all_active(shape.widths());
    // Plant bottlenecks: keep one random node in some hidden layers.
    std::size_t planted = 0;
    for (std::size_t k = 2; k <= 3; ++k) {
      if (rng() & 1U) {
        const std::size_t keep = 1 + rng() % 3;
        for (std::size_t i = 1; i <= 3; ++i) set.set(k, i, i == keep);
        ++planted;
      }
    }
    const auto a = random_point(rng, 3);
    const NodeId target{1 + rng() % 2, 4};
    const Poly u = virtual_polynomial(shape, a, set, target).poly;
    if (u.is_zero()) continue;
    const auto f = factorize(shape, a, set, target);
    EXPECT_EQ(f.factors.size(), planted + 1);
    multi += f.factors.size() > 1 ? 1 : 0;
    Poly prod = c(q(1));
    std::vector<std::size_t> total(shape.weight_layers(), 0);
    for (const auto& g : f.factors) {
      prod = prod * g.poly;
      const auto d = layerwise_degree(g.poly, shape);
      ASSERT_TRUE(d);
      for (std::size_t k = 0; k < total.size(); ++k) total[k] += d->entries[k];
      if (g.poly.total_degree() == 1) {
        const auto kind = linear_support(g.poly, shape).kind;
        EXPECT_TRUE(kind == LinearKind::SingleWeight || kind == LinearKind::FirstLayerSupported);
      }
    }
    EXPECT_EQ(prod, u);
    EXPECT_EQ(total, (std::vector<std::size_t>{1, 1, 1}));
  }
  EXPECT_GT(multi, 50u);
}
