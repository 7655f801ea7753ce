#pragma once

// Layer and width recovery from the polynomials cutting out the nonsmooth
// locus. Variables are flat weight indices but their layer is not assumed.

#include <algorithm>
#include <cstddef>
#include <numeric>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "losscarto/errors.hpp"
#include "losscarto/poly.hpp"

namespace losscarto {

struct RecoveredArchitecture {
  /// d_1, ..., d_L.
  std::vector<std::size_t> widths;
  /// Variables attributed to each weight layer, in layer order.
  std::vector<std::vector<Var>> layer_variables;
};

/// Rebuilds the widths from exact sheet polynomials.
///
/// Linear sheets in more than one variable are first-layer pre-outputs; their
/// supports, merged when they overlap, give one group per second-layer node.
/// Afterwards a sheet in which every monomial is a product of already
/// attributed variables times exactly one new variable attributes those new
/// variables to the next layer. The variables never attributed are the last
/// weight layer, which feeds the linear output and so never bounds a region.
inline RecoveredArchitecture recover_architecture(std::span<const Poly> polys, std::size_t weight_count,
                                                  std::size_t output_width) {
  if (output_width == 0) throw ValidationError("output width must be positive");
  std::vector<int> layer(weight_count, 0);
  auto check_var = [&](Var v) {
    if (v >= weight_count) throw RecoveryError("sheet variable " + std::to_string(v) + " exceeds the weight count");
  };

  // Union-find over variables for the first-layer groups.
  std::vector<std::size_t> parent(weight_count);
  std::iota(parent.begin(), parent.end(), std::size_t{0});
  auto find = [&](std::size_t x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  };
  std::size_t max_support = 0;
  bool any_linear = false;
  for (const auto& p : polys) {
    if (p.is_zero() || p.total_degree() != 1) continue;
    const auto vars = p.variables();
    bool homogeneous = true;
    for (const auto& t : p.terms()) homogeneous = homogeneous && t.monomial.degree() == 1;
    if (!homogeneous || vars.size() < 2) continue;
    any_linear = true;
    max_support = std::max(max_support, vars.size());
    for (Var v : vars) {
      check_var(v);
      layer[v] = 1;
      parent[find(v)] = find(vars.front());
    }
  }
  if (!any_linear) throw RecoveryError("no linear sheet in more than one variable; first layer not identifiable");

  RecoveredArchitecture out;
  std::set<std::size_t> groups;
  std::vector<Var> first;
  for (std::size_t v = 0; v < weight_count; ++v) {
    if (layer[v] == 1) {
      groups.insert(find(v));
      first.push_back(static_cast<Var>(v));
    }
  }
  const std::size_t d2 = groups.size();
  if (first.size() != max_support * d2) {
    throw RecoveryError("first-layer supports do not form equal groups");
  }
  out.widths = {max_support, d2};
  out.layer_variables.push_back(first);

  for (int k = 2;; ++k) {
    std::set<Var> fresh;
    for (const auto& p : polys) {
      if (p.is_zero()) continue;
      std::set<Var> candidates;
      bool eligible = true;
      for (const auto& t : p.terms()) {
        std::size_t unassigned = 0;
        std::size_t assigned = 0;
        Var pick = 0;
        for (const auto& [v, e] : t.monomial.factors()) {
          check_var(v);
          if (layer[v] == 0) {
            unassigned += e;
            pick = v;
          } else {
            assigned += e;
          }
        }
        if (unassigned != 1 || assigned == 0) {
          eligible = false;
          break;
        }
        candidates.insert(pick);
      }
      if (eligible) fresh.insert(candidates.begin(), candidates.end());
    }
    if (fresh.empty()) break;
    for (Var v : fresh) layer[v] = k;
    const std::size_t prev = out.widths.back();
    if (fresh.size() % prev != 0) {
      throw RecoveryError("layer " + std::to_string(k) + " weights do not divide into the previous width");
    }
    out.widths.push_back(fresh.size() / prev);
    out.layer_variables.emplace_back(fresh.begin(), fresh.end());
  }

  std::vector<Var> rest;
  for (std::size_t v = 0; v < weight_count; ++v) {
    if (layer[v] == 0) rest.push_back(static_cast<Var>(v));
  }
  if (rest.size() != out.widths.back() * output_width) {
    throw RecoveryError("remaining " + std::to_string(rest.size()) + " weights do not match the output layer");
  }
  out.widths.push_back(output_width);
  out.layer_variables.push_back(std::move(rest));
  return out;
}

inline RecoveredArchitecture recover_architecture(const std::vector<Poly>& polys, std::size_t weight_count,
                                                  std::size_t output_width) {
  return recover_architecture(std::span<const Poly>(polys), weight_count, output_width);
}

}  // namespace losscarto
