#pragma once

// White-box structure of the loss surface: activation regions, the exact
// polynomial piece of the loss on each region, the walls between adjacent
// regions and which of them are singular (nonsmooth).

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <cstdlib>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "losscarto/activation.hpp"
#include "losscarto/errors.hpp"
#include "losscarto/network.hpp"
#include "losscarto/poly.hpp"
#include "losscarto/random.hpp"
#include "losscarto/virtual.hpp"

namespace losscarto {

/// One activation set per training sample. A region found by probing carries
/// a witness weight point realizing it with strict inequalities; a formal
/// region (built by flipping a flag) has an empty witness.
struct Region {
  std::vector<ActivationSet> patterns;
  std::vector<Rational> witness;

  std::string key() const {
    std::string k;
    for (const auto& p : patterns) {
      k += p.key();
      k += '|';
    }
    return k;
  }

  friend bool operator==(const Region& a, const Region& b) { return a.patterns == b.patterns; }
};

/// Region realized by `weights`. Throws BoundaryError when some hidden
/// pre-output is exactly zero for some sample (the point lies on a wall).
inline Region region_of(const NetworkShape& shape, std::span<const ExactSample> samples,
                        std::span<const Rational> weights) {
  check_weights(shape, weights.size());
  Region r;
  r.witness.assign(weights.begin(), weights.end());
  r.patterns.reserve(samples.size());
  for (std::size_t p = 0; p < samples.size(); ++p) {
    const auto trace = forward<Rational>(shape, weights, std::span<const Rational>(samples[p].input));
    ActivationSet set(shape.widths());
    for (std::size_t k = 2; k < shape.layers(); ++k) {
      const auto& z = trace.pre_output(k);
      for (std::size_t i = 1; i <= z.size(); ++i) {
        const int s = sgn(z[i - 1]);
        if (s == 0) {
          throw BoundaryError("pre-output of (" + std::to_string(i) + "," + std::to_string(k) + ") is zero for sample " +
                              std::to_string(p));
        }
        set.set(k, i, s > 0);
      }
    }
    r.patterns.push_back(std::move(set));
  }
  return r;
}

inline Region region_of(const NetworkShape& shape, std::span<const ExactSample> samples,
                        std::span<const double> weights) {
  const auto exact = to_rational(weights);
  return region_of(shape, samples, std::span<const Rational>(exact));
}

/// 1/2 |b - F|^2 for one sample with the network linearized by `set`.
inline Poly sample_piece(const NetworkShape& shape, const ExactSample& sample, const ActivationSet& set) {
  if (sample.output.size() != shape.output_width()) throw ShapeError("sample output length mismatch");
  auto z = detail::propagate(shape, set, 1, detail::constants(sample.input), shape.layers());
  Poly total;
  for (std::size_t o = 0; o < z.size(); ++o) {
    const Poly r = Poly::constant(sample.output[o]) - z[o];
    total += r * r;
  }
  return total.scaled(Rational(1, 2));
}

/// The fixed polynomial the loss agrees with on a region.
inline Poly region_loss_polynomial(const NetworkShape& shape, std::span<const ExactSample> samples,
                                   const Region& region) {
  if (region.patterns.size() != samples.size()) throw ShapeError("region has one pattern per sample");
  Poly total;
  for (std::size_t p = 0; p < samples.size(); ++p) total += sample_piece(shape, samples[p], region.patterns[p]);
  return total;
}

/// A polynomial whose zero set carries part of the region decomposition.
struct Sheet {
  Poly poly;
  /// Sample whose input enters the polynomial; nullopt = sample-independent.
  std::optional<std::size_t> sample_index;
  /// True iff the adjacent loss pieces differ (the sheet is in Sing(X)).
  bool singular = false;
};

/// Wall between two regions that differ in one flag of one sample.
struct Wall {
  Sheet sheet;
  std::size_t sample = 0;
  NodeId node;
  /// Flags of the flipped sample on the r1 side.
  ActivationSet flags;
};

inline Wall wall_between(const NetworkShape& shape, std::span<const ExactSample> samples, const Region& r1,
                         const Region& r2) {
  if (r1.patterns.size() != samples.size() || r2.patterns.size() != samples.size()) {
    throw ShapeError("regions must carry one pattern per sample");
  }
  std::optional<std::pair<std::size_t, NodeId>> diff;
  for (std::size_t p = 0; p < samples.size(); ++p) {
    const auto& a = r1.patterns[p];
    const auto& b = r2.patterns[p];
    for (std::size_t s = 0; s < a.hidden_count(); ++s) {
      if (a.flag(s) == b.flag(s)) continue;
      if (diff) throw AdjacencyError("regions differ in more than one flag");
      const auto [k, i] = a.node_of_slot(s);
      diff = std::make_pair(p, NodeId{i, k});
    }
  }
  if (!diff) throw AdjacencyError("regions are identical");
  const auto [p, node] = *diff;
  Wall w;
  w.sample = p;
  w.node = node;
  w.flags = r1.patterns[p];
  // The pre-output of the flipped node does not depend on its own flag.
  w.sheet.poly = virtual_polynomial(shape, samples[p].input, r1.patterns[p], node).poly;
  w.sheet.sample_index = p;
  w.sheet.singular = sample_piece(shape, samples[p], r1.patterns[p]) != sample_piece(shape, samples[p], r2.patterns[p]);
  return w;
}

/// True when no variable of the polynomial is a first-layer weight, i.e. the
/// training inputs cannot enter it.
inline bool input_free(const Poly& p, const NetworkShape& shape) {
  for (Var v : p.variables()) {
    if (shape.layer_of(v) == 1) return false;
  }
  return true;
}

struct SheetSet {
  /// Irreducible components of the discovered walls, normalized by their
  /// leading coefficient, deduplicated and in canonical order.
  std::vector<Sheet> sheets;
  std::size_t regions = 0;
  std::size_t walls = 0;

  std::vector<Poly> singular_polys() const {
    std::vector<Poly> out;
    for (const auto& s : sheets) {
      if (s.singular) out.push_back(s.poly);
    }
    return out;
  }

  const Sheet* find(const Poly& p) const {
    const Poly n = normalized(p);
    for (const auto& s : sheets) {
      if (s.poly == n) return &s;
    }
    return nullptr;
  }
};

inline std::size_t worker_count() {
  if (const char* env = std::getenv("LOSSCARTO_THREADS")) {
    const long n = std::strtol(env, nullptr, 10);
    if (n >= 1) return static_cast<std::size_t>(n);
  }
  return std::max<std::size_t>(1, std::thread::hardware_concurrency());
}

/// Walls of every region met by `probe_budget` random witnesses (uniform
/// dyadic points of [-1,1]^N drawn from independent per-probe streams).
/// Each (sample, hidden node) flip of a found region is a candidate wall; the
/// wall polynomial is split into its bottleneck factors and every factor is
/// reported, singular when it belongs to a wall whose pieces differ.
///
/// Realizability is decided by sampling only, so rare regions may be missed.
inline SheetSet enumerate_singular_sheets(const NetworkShape& shape, std::span<const ExactSample> samples,
                                          std::size_t probe_budget, std::uint64_t seed = 0,
                                          std::size_t threads = 0) {
  if (threads == 0) threads = worker_count();
  const std::size_t n = shape.weight_count();

  // Probe in parallel; the merge below runs in probe order.
  std::vector<std::optional<Region>> probes(probe_budget);
  auto work = [&](std::size_t begin, std::size_t end) {
    for (std::size_t t = begin; t < end; ++t) {
      auto rng = make_stream(seed, t);
      std::vector<Rational> w(n);
      for (auto& x : w) x = to_rational(uniform_dyadic(rng));
      try {
        probes[t] = region_of(shape, samples, std::span<const Rational>(w));
      } catch (const BoundaryError&) {
      }
    }
  };
  threads = std::min(threads, std::max<std::size_t>(1, probe_budget));
  if (threads <= 1) {
    work(0, probe_budget);
  } else {
    std::vector<std::thread> pool;
    const std::size_t chunk = (probe_budget + threads - 1) / threads;
    for (std::size_t t = 0; t < threads; ++t) {
      const std::size_t b = t * chunk;
      const std::size_t e = std::min(probe_budget, b + chunk);
      if (b < e) pool.emplace_back(work, b, e);
    }
    for (auto& th : pool) th.join();
  }

  SheetSet out;
  std::map<std::string, bool> seen_regions;
  // Walls depend on one sample's flags only; cache by (sample, flags, node).
  std::map<std::string, bool> seen_walls;
  std::map<std::string, Poly> pieces;
  auto piece = [&](std::size_t p, const ActivationSet& set) -> const Poly& {
    const std::string key = std::to_string(p) + ":" + set.key();
    auto it = pieces.find(key);
    if (it == pieces.end()) it = pieces.emplace(key, sample_piece(shape, samples[p], set)).first;
    return it->second;
  };
  std::map<Poly, Sheet, PolyLess> found;

  for (auto& probe : probes) {
    if (!probe) continue;
    if (!seen_regions.emplace(probe->key(), true).second) continue;
    ++out.regions;
    for (std::size_t p = 0; p < samples.size(); ++p) {
      const ActivationSet& flags = probe->patterns[p];
      for (std::size_t s = 0; s < flags.hidden_count(); ++s) {
        const auto [k, i] = flags.node_of_slot(s);
        // The wall polynomial ignores the flipped node's own flag and every
        // flag at or above its layer; key on the rest plus the singularity.
        const ActivationSet flipped = flags.flipped(k, i);
        const bool singular = piece(p, flags) != piece(p, flipped);
        const std::string wall_key = std::to_string(p) + ":" + std::to_string(s) + ":" +
                                     (flags.flag(s) ? flags.key() : flipped.key());
        if (!seen_walls.emplace(wall_key, true).second) continue;
        const Poly wall = virtual_polynomial(shape, samples[p].input, flags, {i, k}).poly;
        if (wall.is_zero()) continue;
        ++out.walls;
        const auto split = factorize(shape, samples[p].input, flags, {i, k});
        for (const auto& f : split.factors) {
          if (f.poly.is_constant()) continue;
          Poly key = normalized(f.poly);
          const bool free = input_free(f.poly, shape);
          auto [it, inserted] = found.try_emplace(key, Sheet{key, std::nullopt, singular});
          if (inserted) {
            if (!free) it->second.sample_index = p;
          } else {
            it->second.singular = it->second.singular || singular;
          }
        }
      }
    }
  }
  if (out.regions == 0) throw SamplingError("no realizable region found within the probe budget");
  for (auto& [k, s] : found) out.sheets.push_back(std::move(s));
  return out;
}

/// Singular input-free sheets found for both sample sets (up to scale).
inline std::vector<Poly> sample_independent_sheets(const NetworkShape& shape, std::span<const ExactSample> a,
                                                   std::span<const ExactSample> b, std::size_t probe_budget,
                                                   std::uint64_t seed = 0) {
  if (a.empty() || b.empty()) throw ValidationError("both sample sets must be nonempty");
  const auto sa = enumerate_singular_sheets(shape, a, probe_budget, seed);
  // Same probe points for both sets, so identical sets give identical runs.
  const auto sb = enumerate_singular_sheets(shape, b, probe_budget, seed);
  std::vector<Poly> out;
  for (const auto& s : sa.sheets) {
    if (!s.singular || s.sample_index || !input_free(s.poly, shape)) continue;
    const Sheet* other = sb.find(s.poly);
    if (other && other->singular && !other->sample_index) out.push_back(s.poly);
  }
  return out;
}

/// E(w0 + t d) at `count` evenly spaced t in [t_lo, t_hi].
inline std::vector<std::pair<double, double>> surface_slice(const NetworkShape& shape,
                                                            std::span<const double> base,
                                                            std::span<const double> direction,
                                                            std::span<const Sample> samples, double t_lo,
                                                            double t_hi, std::size_t count) {
  check_weights(shape, base.size());
  if (direction.size() != base.size()) throw ValidationError("slice direction has the wrong dimension");
  if (std::all_of(direction.begin(), direction.end(), [](double v) { return v == 0.0; })) {
    throw ValidationError("slice direction must be nonzero");
  }
  if (count < 2) throw ValidationError("a slice needs at least two points");
  std::vector<std::pair<double, double>> out;
  out.reserve(count);
  std::vector<double> w(base.size());
  for (std::size_t m = 0; m < count; ++m) {
    const double t = t_lo + (t_hi - t_lo) * static_cast<double>(m) / static_cast<double>(count - 1);
    for (std::size_t v = 0; v < w.size(); ++v) w[v] = base[v] + t * direction[v];
    out.emplace_back(t, loss<double>(shape, std::span<const double>(w), samples));
  }
  return out;
}

}  // namespace losscarto
