#pragma once

// Fully connected ReLU networks without biases: shapes, the frozen flat
// weight ordering, forward evaluation and the square loss.
//
// Layers and nodes are 1-based throughout: layer 1 is the input layer,
// layer L the (linear) output layer, and ReLU acts on layers 2..L-1.

#include <cstddef>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "losscarto/activation.hpp"
#include "losscarto/errors.hpp"
#include "losscarto/rational.hpp"

namespace losscarto {

/// Position of one weight: the edge from node `source` of layer `layer`
/// to node `target` of layer `layer + 1`.
struct WeightCoord {
  std::size_t layer = 0;
  std::size_t source = 0;
  std::size_t target = 0;

  friend bool operator==(const WeightCoord&, const WeightCoord&) = default;
};

/// Layer widths d_1..d_L and the flat index map over the N weights.
///
/// Flat order is layer-major, then target-major, then source-major:
///   index_of(k, i, j) = offset(k) + (j - 1) * d_k + (i - 1)
/// which stores each W_k (d_{k+1} x d_k) row-major. Reports quote normals in
/// these coordinates, so the order is part of the file formats.
class NetworkShape {
 public:
  NetworkShape() = default;

  explicit NetworkShape(std::vector<std::size_t> widths) : widths_(std::move(widths)) {
    if (widths_.size() < 2) throw ShapeError("a network needs at least two layers");
    for (auto d : widths_) {
      if (d == 0) throw ShapeError("layer widths must be positive");
    }
    offsets_.assign(widths_.size(), 0);
    std::size_t n = 0;
    for (std::size_t k = 1; k < widths_.size(); ++k) {
      offsets_[k - 1] = n;
      n += widths_[k - 1] * widths_[k];
    }
    offsets_.back() = n;
    weight_count_ = n;
  }

  std::size_t layers() const { return widths_.size(); }
  std::size_t weight_layers() const { return widths_.size() - 1; }
  const std::vector<std::size_t>& widths() const { return widths_; }
  std::size_t weight_count() const { return weight_count_; }
  std::size_t input_width() const { return widths_.front(); }
  std::size_t output_width() const { return widths_.back(); }

  std::size_t width(std::size_t k) const {
    if (k < 1 || k > widths_.size()) throw IndexError("layer " + std::to_string(k) + " out of range");
    return widths_[k - 1];
  }

  /// Number of ReLU nodes (layers 2..L-1).
  std::size_t hidden_count() const {
    std::size_t n = 0;
    for (std::size_t k = 2; k + 1 <= widths_.size(); ++k) n += widths_[k - 1];
    return n;
  }

  /// First flat index of weight layer k.
  std::size_t layer_offset(std::size_t k) const {
    if (k < 1 || k > weight_layers()) throw IndexError("weight layer " + std::to_string(k) + " out of range");
    return offsets_[k - 1];
  }

  std::size_t index_of(std::size_t k, std::size_t i, std::size_t j) const {
    if (k < 1 || k > weight_layers()) throw IndexError("weight layer " + std::to_string(k) + " out of range");
    if (i < 1 || i > widths_[k - 1]) throw IndexError("source node " + std::to_string(i) + " out of range");
    if (j < 1 || j > widths_[k]) throw IndexError("target node " + std::to_string(j) + " out of range");
    return offsets_[k - 1] + (j - 1) * widths_[k - 1] + (i - 1);
  }

  WeightCoord coord_of(std::size_t index) const {
    if (index >= weight_count_) throw IndexError("flat weight index " + std::to_string(index) + " out of range");
    std::size_t k = 1;
    while (index >= offsets_[k]) ++k;
    const std::size_t local = index - offsets_[k - 1];
    const std::size_t d = widths_[k - 1];
    return {k, local % d + 1, local / d + 1};
  }

  /// Weight layer of a flat index.
  std::size_t layer_of(std::size_t index) const { return coord_of(index).layer; }

  friend bool operator==(const NetworkShape& a, const NetworkShape& b) { return a.widths_ == b.widths_; }

 private:
  std::vector<std::size_t> widths_;
  std::vector<std::size_t> offsets_;  // offsets_[k-1] = first index of layer k; back() = N
  std::size_t weight_count_ = 0;
};

template <class T>
struct TrainingSample {
  std::vector<T> input;
  std::vector<T> output;
};

using Sample = TrainingSample<double>;
using ExactSample = TrainingSample<Rational>;

inline ExactSample to_exact(const Sample& s) { return {to_rational(s.input), to_rational(s.output)}; }

inline std::vector<ExactSample> to_exact(std::span<const Sample> samples) {
  std::vector<ExactSample> out;
  out.reserve(samples.size());
  for (const auto& s : samples) out.push_back(to_exact(s));
  return out;
}

/// Per-layer pre-outputs z^(k) and outputs x^(k) of one forward pass.
template <class T>
struct ForwardTrace {
  // Indexed by layer - 1. pre[0] is empty (the input layer has no pre-output).
  std::vector<std::vector<T>> pre;
  std::vector<std::vector<T>> post;

  const std::vector<T>& pre_output(std::size_t k) const { return pre.at(k - 1); }
  const std::vector<T>& output(std::size_t k) const { return post.at(k - 1); }
  const std::vector<T>& final() const { return pre.back(); }
};

inline void check_weights(const NetworkShape& shape, std::size_t count) {
  if (count != shape.weight_count()) {
    throw ShapeError("expected " + std::to_string(shape.weight_count()) + " weights, got " +
                     std::to_string(count));
  }
}

template <class T>
ForwardTrace<T> forward(const NetworkShape& shape, std::span<const T> weights, std::span<const T> input) {
  check_weights(shape, weights.size());
  if (input.size() != shape.input_width()) {
    throw ShapeError("input has length " + std::to_string(input.size()) + ", expected " +
                     std::to_string(shape.input_width()));
  }
  const std::size_t L = shape.layers();
  ForwardTrace<T> trace;
  trace.pre.resize(L);
  trace.post.resize(L);
  trace.post[0].assign(input.begin(), input.end());
  for (std::size_t k = 1; k < L; ++k) {
    const std::size_t rows = shape.width(k + 1);
    const std::size_t cols = shape.width(k);
    const std::size_t base = shape.layer_offset(k);
    const auto& x = trace.post[k - 1];
    std::vector<T> z(rows, T(0));
    for (std::size_t j = 0; j < rows; ++j) {
      T acc(0);
      for (std::size_t i = 0; i < cols; ++i) acc += weights[base + j * cols + i] * x[i];
      z[j] = acc;
    }
    trace.pre[k] = z;
    if (k + 1 < L) {
      for (auto& v : z) {
        if (!(v > T(0))) v = T(0);
      }
    }
    trace.post[k] = std::move(z);
  }
  return trace;
}

template <class T>
ForwardTrace<T> forward(const NetworkShape& shape, const std::vector<T>& weights, const std::vector<T>& input) {
  return forward<T>(shape, std::span<const T>(weights), std::span<const T>(input));
}

/// Half the squared residual of one sample.
template <class T>
T sample_loss(const NetworkShape& shape, std::span<const T> weights, const TrainingSample<T>& sample) {
  if (sample.output.size() != shape.output_width()) {
    throw ShapeError("sample output has length " + std::to_string(sample.output.size()) + ", expected " +
                     std::to_string(shape.output_width()));
  }
  const auto trace = forward<T>(shape, weights, std::span<const T>(sample.input));
  T acc(0);
  const auto& f = trace.final();
  for (std::size_t o = 0; o < f.size(); ++o) {
    const T r = sample.output[o] - f[o];
    acc += r * r;
  }
  return acc / T(2);
}

/// E(w) = sum over samples of 1/2 |b - F_w(a)|^2. An empty sample set gives 0.
template <class T>
T loss(const NetworkShape& shape, std::span<const T> weights, std::span<const TrainingSample<T>> samples) {
  check_weights(shape, weights.size());
  T total(0);
  for (const auto& s : samples) total += sample_loss<T>(shape, weights, s);
  return total;
}

template <class T>
T loss(const NetworkShape& shape, const std::vector<T>& weights, const std::vector<TrainingSample<T>>& samples) {
  return loss<T>(shape, std::span<const T>(weights), std::span<const TrainingSample<T>>(samples));
}

/// Node (i,k) is active iff z_i^(k) > 0; an exact zero counts as negative.
template <class T>
ActivationSet realized_activation_set(const NetworkShape& shape, std::span<const T> weights,
                                      std::span<const T> input) {
  const auto trace = forward<T>(shape, weights, input);
  ActivationSet set(shape.widths());
  for (std::size_t k = 2; k < shape.layers(); ++k) {
    const auto& z = trace.pre_output(k);
    for (std::size_t i = 1; i <= z.size(); ++i) set.set(k, i, z[i - 1] > T(0));
  }
  return set;
}

template <class T>
ActivationSet realized_activation_set(const NetworkShape& shape, const std::vector<T>& weights,
                                      const std::vector<T>& input) {
  return realized_activation_set<T>(shape, std::span<const T>(weights), std::span<const T>(input));
}

}  // namespace losscarto
