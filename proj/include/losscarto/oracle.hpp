#pragma once

#include <atomic>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <memory>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "losscarto/errors.hpp"
#include "losscarto/network.hpp"

namespace losscarto {

/// Black-box access to a loss function on R^N. The attack sees nothing else.
/// Queries are counted; a query that would exceed the budget throws
/// OracleBudgetExhausted without being evaluated.
class LossOracle {
 public:
  using Function = std::function<double(std::span<const double>)>;

  LossOracle(std::size_t dimension, Function f,
             std::uint64_t budget = std::numeric_limits<std::uint64_t>::max())
      : dimension_(dimension), f_(std::move(f)), budget_(budget) {
    if (dimension_ == 0) throw ValidationError("oracle dimension must be positive");
  }

  LossOracle(const LossOracle&) = delete;
  LossOracle& operator=(const LossOracle&) = delete;

  double operator()(std::span<const double> w) const {
    if (w.size() != dimension_) {
      throw ShapeError("oracle expects " + std::to_string(dimension_) + " coordinates, got " + std::to_string(w.size()));
    }
    std::uint64_t used = count_.load(std::memory_order_relaxed);
    do {
      if (used >= budget_) throw OracleBudgetExhausted();
    } while (!count_.compare_exchange_weak(used, used + 1, std::memory_order_relaxed));
    return f_(w);
  }

  double operator()(const std::vector<double>& w) const { return (*this)(std::span<const double>(w)); }

  std::size_t dimension() const { return dimension_; }
  std::uint64_t query_count() const { return count_.load(std::memory_order_relaxed); }
  std::uint64_t budget() const { return budget_; }
  std::uint64_t remaining() const { return budget_ - std::min(budget_, query_count()); }
  void set_budget(std::uint64_t budget) { budget_ = budget; }

 private:
  std::size_t dimension_;
  Function f_;
  std::uint64_t budget_;
  mutable std::atomic<std::uint64_t> count_{0};
};

/// E(w) of a network over its training set. The samples are captured inside
/// the closure and are not reachable through the oracle.
inline std::unique_ptr<LossOracle> make_loss_oracle(const NetworkShape& shape, std::vector<Sample> samples,
                                                    std::uint64_t budget = std::numeric_limits<std::uint64_t>::max()) {
  return std::make_unique<LossOracle>(
      shape.weight_count(),
      [shape, samples = std::move(samples)](std::span<const double> w) {
        return loss<double>(shape, w, std::span<const Sample>(samples));
      },
      budget);
}

/// E restricted to the line base + a * direction, as a one-parameter oracle.
inline std::unique_ptr<LossOracle> make_line_oracle(const NetworkShape& shape, std::vector<Sample> samples,
                                                    std::vector<double> base, std::vector<double> direction,
                                                    std::uint64_t budget = std::numeric_limits<std::uint64_t>::max()) {
  check_weights(shape, base.size());
  check_weights(shape, direction.size());
  return std::make_unique<LossOracle>(
      1,
      [shape, samples = std::move(samples), base = std::move(base),
       direction = std::move(direction)](std::span<const double> a) {
        std::vector<double> w(base.size());
        for (std::size_t v = 0; v < w.size(); ++v) w[v] = base[v] + a[0] * direction[v];
        return loss<double>(shape, std::span<const double>(w), std::span<const Sample>(samples));
      },
      budget);
}

}  // namespace losscarto
