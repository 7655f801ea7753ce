#pragma once

// Virtual polynomials: the symbolic pre-output of a node in the linear
// network obtained by zeroing every node an activation set marks negative.
// Also the active subnetwork of an activation set and the factorization of
// a virtual polynomial at its single-node ("bottleneck") layers.

#include <cstddef>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "losscarto/activation.hpp"
#include "losscarto/errors.hpp"
#include "losscarto/network.hpp"
#include "losscarto/poly.hpp"

namespace losscarto {

/// Node (i, k): the i-th node of layer k.
struct NodeId {
  std::size_t node = 0;
  std::size_t layer = 0;

  friend bool operator==(const NodeId&, const NodeId&) = default;
};

struct VirtualPoly {
  Poly poly;
  NodeId node;
  ActivationSet activation_set;
  std::vector<Rational> input;
};

namespace detail {

inline void check_node(const NetworkShape& shape, NodeId n) {
  if (n.layer < 1 || n.layer > shape.layers() || n.node < 1 || n.node > shape.width(n.layer)) {
    throw IndexError("node (" + std::to_string(n.node) + "," + std::to_string(n.layer) + ") out of range");
  }
}

inline void check_activation_set(const NetworkShape& shape, const ActivationSet& set) {
  if (set.widths() != shape.widths()) throw ShapeError("activation set belongs to a different shape");
}

/// Symbolic pre-outputs at `to_layer`, starting from the given outputs at
/// `from_layer` and masking hidden nodes between them by `set`.
inline std::vector<Poly> propagate(const NetworkShape& shape, const ActivationSet& set, std::size_t from_layer,
                                   std::vector<Poly> outputs, std::size_t to_layer) {
  std::vector<Poly> z = outputs;
  for (std::size_t k = from_layer; k < to_layer; ++k) {
    const std::size_t rows = shape.width(k + 1);
    const std::size_t cols = shape.width(k);
    std::vector<Poly> next(rows);
    for (std::size_t j = 1; j <= rows; ++j) {
      Poly acc;
      for (std::size_t i = 1; i <= cols; ++i) {
        if (outputs[i - 1].is_zero()) continue;
        acc += outputs[i - 1].times_variable(static_cast<Var>(shape.index_of(k, i, j)));
      }
      next[j - 1] = std::move(acc);
    }
    z = next;
    outputs = std::move(next);
    if (k + 1 < shape.layers()) {
      for (std::size_t j = 1; j <= rows; ++j) {
        if (!set.active(k + 1, j)) outputs[j - 1] = Poly{};
      }
    }
  }
  return z;
}

inline std::vector<Poly> constants(std::span<const Rational> values) {
  std::vector<Poly> out;
  out.reserve(values.size());
  for (const auto& v : values) out.push_back(Poly::constant(v));
  return out;
}

}  // namespace detail

/// Pre-output of node (i, k) in the linear network induced by `set`, as a
/// polynomial in the weights with the input as coefficients. For k = 1 this
/// is the constant a_i.
inline VirtualPoly virtual_polynomial(const NetworkShape& shape, std::span<const Rational> input,
                                      const ActivationSet& set, NodeId node) {
  detail::check_node(shape, node);
  detail::check_activation_set(shape, set);
  if (input.size() != shape.input_width()) throw ShapeError("input length does not match the input layer");
  VirtualPoly out{{}, node, set, std::vector<Rational>(input.begin(), input.end())};
  if (node.layer == 1) {
    out.poly = Poly::constant(input[node.node - 1]);
    return out;
  }
  auto z = detail::propagate(shape, set, 1, detail::constants(input), node.layer);
  out.poly = std::move(z[node.node - 1]);
  return out;
}

inline VirtualPoly virtual_polynomial(const NetworkShape& shape, const std::vector<Rational>& input,
                                      const ActivationSet& set, NodeId node) {
  return virtual_polynomial(shape, std::span<const Rational>(input), set, node);
}

struct VirtualPolyWitness {
  Poly poly;
  ActivationSet witness;
};

/// Every distinct virtual polynomial of type (i, k) over all activation sets,
/// each with one witness, sorted by canonical order. Only flags of layers
/// 2..k-1 can influence node (i, k); the witness keeps every other hidden
/// node active, and `cap` bounds the number of influencing nodes.
inline std::vector<VirtualPolyWitness> enumerate_virtual_polynomials(const NetworkShape& shape,
                                                                     std::span<const Rational> input, NodeId node,
                                                                     std::size_t cap = 16) {
  detail::check_node(shape, node);
  std::vector<std::pair<std::size_t, std::size_t>> free_nodes;
  for (std::size_t k = 2; k < node.layer && k < shape.layers(); ++k) {
    for (std::size_t i = 1; i <= shape.width(k); ++i) free_nodes.emplace_back(k, i);
  }
  if (free_nodes.size() > cap || free_nodes.size() >= 63) {
    throw BudgetError(std::to_string(free_nodes.size()) + " influencing hidden nodes exceed the enumeration cap of " +
                      std::to_string(cap));
  }
  std::map<Poly, ActivationSet, PolyLess> found;
  const std::uint64_t count = std::uint64_t{1} << free_nodes.size();
  for (std::uint64_t mask = 0; mask < count; ++mask) {
    ActivationSet set(shape.widths());
    for (std::size_t b = 0; b < free_nodes.size(); ++b) {
      set.set(free_nodes[b].first, free_nodes[b].second, ((mask >> b) & 1U) == 0);
    }
    auto vp = virtual_polynomial(shape, input, set, node);
    found.try_emplace(std::move(vp.poly), set);
  }
  std::vector<VirtualPolyWitness> out;
  out.reserve(found.size());
  for (auto& [p, w] : found) out.push_back({p, w});
  return out;
}

inline std::vector<VirtualPolyWitness> enumerate_virtual_polynomials(const NetworkShape& shape,
                                                                     const std::vector<Rational>& input, NodeId node,
                                                                     std::size_t cap = 16) {
  return enumerate_virtual_polynomials(shape, std::span<const Rational>(input), node, cap);
}

// ---------------------------------------------------------------------------
// Active subnetworks and bottlenecks.

struct ActiveSubnetwork {
  /// Present nodes of each layer, indexed by layer - 1. Input and output
  /// layers are always complete.
  std::vector<std::vector<std::size_t>> nodes;
  /// Edges kept between present nodes, indexed by weight layer - 1.
  std::vector<std::vector<WeightCoord>> edges;

  std::size_t layers() const { return nodes.size(); }
};

inline ActiveSubnetwork p_active_network(const NetworkShape& shape, const ActivationSet& set) {
  detail::check_activation_set(shape, set);
  ActiveSubnetwork sub;
  const std::size_t L = shape.layers();
  sub.nodes.resize(L);
  for (std::size_t k = 1; k <= L; ++k) {
    for (std::size_t i = 1; i <= shape.width(k); ++i) {
      if (set.active(k, i)) sub.nodes[k - 1].push_back(i);
    }
  }
  sub.edges.resize(L - 1);
  for (std::size_t k = 1; k < L; ++k) {
    for (std::size_t j : sub.nodes[k]) {
      for (std::size_t i : sub.nodes[k - 1]) sub.edges[k - 1].push_back({k, i, j});
    }
  }
  return sub;
}

struct BottleneckReport {
  /// Layers 2..L holding exactly one present node.
  std::vector<std::size_t> bottlenecks;
  /// Layers with no present node; any of them annihilates every path.
  std::vector<std::size_t> dead_cuts;
};

inline BottleneckReport bottleneck_layers(const ActiveSubnetwork& sub) {
  BottleneckReport out;
  for (std::size_t k = 2; k <= sub.layers(); ++k) {
    const std::size_t n = sub.nodes[k - 1].size();
    if (n == 0) out.dead_cuts.push_back(k);
    if (n == 1) out.bottlenecks.push_back(k);
  }
  if (!out.dead_cuts.empty()) out.bottlenecks.clear();
  return out;
}

struct Factor {
  Poly poly;
  NodeId from;  // layer 1 with node 0 for the first factor (starts at the input)
  NodeId to;
};

struct Factorization {
  Poly product;  // the virtual polynomial being factored
  std::vector<Factor> factors;
};

/// Splits the virtual polynomial of `target` under `set` at every interior
/// layer holding a single active node. Factor m is the output of the
/// subnetwork running from one single-node layer to the next; the first
/// factor starts at the input and the last ends at `target`. The product of
/// the factors equals the virtual polynomial exactly.
///
/// Usually `target` is an output node (i, L); hidden targets are accepted so
/// that walls of the loss surface can be split the same way.
inline Factorization factorize(const NetworkShape& shape, std::span<const Rational> input, const ActivationSet& set,
                               NodeId target) {
  detail::check_node(shape, target);
  if (target.layer < 2) throw IndexError("factorize needs a target in layer 2 or later");
  Factorization out;
  out.product = virtual_polynomial(shape, input, set, target).poly;
  if (out.product.is_zero()) {
    throw ZeroPolynomialError("virtual polynomial of (" + std::to_string(target.node) + "," +
                              std::to_string(target.layer) + ") is zero under this activation set");
  }
  std::vector<NodeId> cuts;
  for (std::size_t k = 2; k < target.layer; ++k) {
    if (set.active_count(k) == 1) {
      for (std::size_t i = 1; i <= shape.width(k); ++i) {
        if (set.active(k, i)) cuts.push_back({i, k});
      }
    }
  }
  cuts.push_back(target);

  NodeId from{0, 1};
  for (const NodeId& to : cuts) {
    Factor f;
    f.from = from;
    f.to = to;
    if (from.layer == 1) {
      f.poly = virtual_polynomial(shape, input, set, to).poly;
    } else {
      std::vector<Poly> start(shape.width(from.layer));
      start[from.node - 1] = Poly::constant(1);
      f.poly = detail::propagate(shape, set, from.layer, std::move(start), to.layer)[to.node - 1];
    }
    out.factors.push_back(std::move(f));
    from = to;
  }
  return out;
}

inline Factorization factorize(const NetworkShape& shape, const std::vector<Rational>& input,
                               const ActivationSet& set, NodeId target) {
  return factorize(shape, std::span<const Rational>(input), set, target);
}

}  // namespace losscarto
