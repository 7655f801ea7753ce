#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "losscarto/errors.hpp"
#include "losscarto/network.hpp"
#include "losscarto/poly.hpp"

namespace losscarto {

struct HyperplaneFit {
  std::vector<double> normal;  // unit, first nonzero entry positive
  double residual = 0.0;       // RMS of normal . (p_i - p_0) over i >= 1
};

namespace detail {

inline void orient(std::vector<double>& v) {
  const double m = *std::max_element(v.begin(), v.end(), [](double a, double b) { return std::abs(a) < std::abs(b); });
  const double cut = 1e-12 * std::abs(m);
  for (double x : v) {
    if (std::abs(x) > cut) {
      if (x < 0) {
        for (auto& y : v) y = -y;
      }
      return;
    }
  }
}

}  // namespace detail

/// Hyperplane through p_0 best fitting all points: the right singular vector
/// of the difference matrix [p_i - p_0] with the smallest singular value.
inline HyperplaneFit fit_hyperplane(std::span<const std::vector<double>> points) {
  if (points.empty()) throw DegeneracyError("no points to fit");
  const std::size_t n = points.front().size();
  if (points.size() < n + 1) throw DegeneracyError("need at least N+1 points for a hyperplane in R^N");
  const std::size_t rows = points.size() - 1;
  Eigen::MatrixXd diff(static_cast<Eigen::Index>(std::max<std::size_t>(rows, n)), static_cast<Eigen::Index>(n));
  diff.setZero();
  for (std::size_t r = 0; r < rows; ++r) {
    if (points[r + 1].size() != n) throw ShapeError("points differ in dimension");
    for (std::size_t c = 0; c < n; ++c) diff(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = points[r + 1][c] - points[0][c];
  }
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(diff, Eigen::ComputeFullV);
  const auto& sv = svd.singularValues();
  const double top = sv(0);
  if (n >= 2) {
    // The tangent directions must span N-1 dimensions.
    if (!(top > 0) || sv(static_cast<Eigen::Index>(n) - 2) <= 1e-10 * top) {
      throw DegeneracyError("point cloud spans fewer than N-1 directions");
    }
  }
  HyperplaneFit fit;
  fit.normal.resize(n);
  const Eigen::VectorXd v = svd.matrixV().col(static_cast<Eigen::Index>(n) - 1);
  for (std::size_t c = 0; c < n; ++c) fit.normal[c] = v(static_cast<Eigen::Index>(c));
  detail::orient(fit.normal);
  double ss = 0.0;
  for (std::size_t r = 0; r < rows; ++r) {
    double d = 0.0;
    for (std::size_t c = 0; c < n; ++c) d += fit.normal[c] * (points[r + 1][c] - points[0][c]);
    ss += d * d;
  }
  fit.residual = rows ? std::sqrt(ss / static_cast<double>(rows)) : 0.0;
  return fit;
}

inline HyperplaneFit fit_hyperplane(const std::vector<std::vector<double>>& points) {
  return fit_hyperplane(std::span<const std::vector<double>>(points));
}

enum class SheetKind { WeightParameter, FirstLayer, Nonlinear };

inline const char* to_string(SheetKind k) {
  switch (k) {
    case SheetKind::WeightParameter: return "weight-parameter";
    case SheetKind::FirstLayer: return "first-layer";
    case SheetKind::Nonlinear: return "nonlinear";
  }
  return "nonlinear";
}

struct InputCandidate {
  SheetKind kind = SheetKind::Nonlinear;
  /// FirstLayer: unit coefficient vector by source node (length d_1).
  std::vector<double> direction;
  /// FirstLayer: target node j of layer 2.
  std::size_t target = 0;
  /// WeightParameter: the single flat weight index.
  std::size_t weight = 0;
  /// WeightParameter sheet on a first-layer weight: a one-hot input would
  /// produce the same sheet, so the two cannot be told apart.
  bool possible_one_hot = false;
};

/// Reads a training-input direction off a sheet normal given in flat weight
/// coordinates. Entries below support_tol * max|entry| are treated as zero.
inline InputCandidate extract_input_direction(std::span<const double> normal, const NetworkShape& shape,
                                              double support_tol = 1e-4) {
  check_weights(shape, normal.size());
  double top = 0.0;
  for (double x : normal) top = std::max(top, std::abs(x));
  InputCandidate out;
  if (top == 0.0) return out;
  const double cut = support_tol * top;
  std::vector<std::size_t> support;
  for (std::size_t v = 0; v < normal.size(); ++v) {
    if (std::abs(normal[v]) >= cut) support.push_back(v);
  }
  if (support.size() == 1) {
    out.kind = SheetKind::WeightParameter;
    out.weight = support.front();
    out.possible_one_hot = shape.layer_of(support.front()) == 1;
    return out;
  }
  std::size_t target = 0;
  for (std::size_t v : support) {
    const auto c = shape.coord_of(v);
    if (c.layer != 1 || (target != 0 && c.target != target)) return out;
    target = c.target;
  }
  out.kind = SheetKind::FirstLayer;
  out.target = target;
  out.direction.assign(shape.input_width(), 0.0);
  double norm = 0.0;
  for (std::size_t v : support) {
    const auto c = shape.coord_of(v);
    out.direction[c.source - 1] = normal[v];
    norm += normal[v] * normal[v];
  }
  norm = std::sqrt(norm);
  for (auto& x : out.direction) x /= norm;
  detail::orient(out.direction);
  return out;
}

inline double abs_cosine(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw ShapeError("vectors differ in length");
  double ab = 0.0, aa = 0.0, bb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ab += a[i] * b[i];
    aa += a[i] * a[i];
    bb += b[i] * b[i];
  }
  if (aa == 0.0 || bb == 0.0) return 0.0;
  return std::min(1.0, std::abs(ab) / std::sqrt(aa * bb));
}

}  // namespace losscarto
