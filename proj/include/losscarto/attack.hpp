#pragma once

// Black-box training-input recovery from loss queries.
//
// Random lines are scanned for kinks. Around each new kink the sheet is
// sampled at N+1 points, a hyperplane is fitted through them, and when the
// normal is supported on one first-layer column it is read as a training
// input up to scale. With a one-dimensional oracle the kinks themselves are
// reported (the line model a -> E(a) of a two-input, one-hidden-node net,
// whose kinks sit at a = y / x for the samples (x, y)).

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "losscarto/errors.hpp"
#include "losscarto/hyperplane.hpp"
#include "losscarto/kinks.hpp"
#include "losscarto/network.hpp"
#include "losscarto/oracle.hpp"
#include "losscarto/random.hpp"
#include "losscarto/regionfit.hpp"

namespace losscarto {

struct AttackConfig {
  std::uint64_t budget = 200000;
  std::size_t grid = 64;
  /// Kink flag threshold, relative to the local loss scale.
  double tol = 1e-9;
  /// Harvest radius; 0 means 1e-3 * |seed point|.
  double radius = 0.0;
  std::uint64_t seed = 0;
  bool hyperplane_path = true;
  bool regionfit_path = false;
  /// Degree bound of the loss pieces along a line, 2(L-1).
  std::size_t degree = 4;
  double t_lo = -1.0;
  double t_hi = 1.0;
  /// Line bases are drawn uniformly from [-box, box]^N.
  double box = 1.0;
  std::size_t max_lines = 1000;
  double support_tol = 1e-4;
  /// Largest accepted fit residual, relative to the harvest radius.
  double residual_tol = 1e-4;
  double dedup_cos = 1.0 - 1e-6;
  /// Widths of the attacked network, if known; sharpens the classification
  /// of normals and enables the region-fit cross-check.
  std::vector<std::size_t> widths_hint;
  std::uint64_t monomial_cap = 5000;
  /// Matches in scoring need at least this absolute cosine.
  double match_cos = 0.999;
  std::size_t harvest_attempts = 3;
};

struct RecoveredDirection {
  /// Unit vector of length d_1.
  std::vector<double> direction;
  /// Second-layer node whose pre-output vanishes on the sheet (1-based).
  std::size_t target = 0;
  double residual = 0.0;
  /// Fitted sheet normal in flat weight coordinates (empty for 1-D oracles).
  std::vector<double> normal;
  std::size_t kink = 0;
};

struct Match {
  std::size_t direction = 0;
  std::size_t sample = 0;
  double abs_cos = 0.0;
  /// c with c * direction ~ true input.
  double scale = 0.0;
};

struct KinkRecord {
  std::size_t line_id = 0;
  double t = 0.0;
  double jump = 0.0;
  bool refined = false;
};

struct SheetRecord {
  std::size_t kink = 0;
  SheetKind kind = SheetKind::Nonlinear;
  double residual = 0.0;
  /// Accepted as a linear sheet (residual within tolerance).
  bool accepted = false;
  bool possible_one_hot = false;
  std::string note;
};

struct CrossCheck {
  std::size_t direction = 0;
  std::string status;
  double abs_cos = 0.0;
};

struct ReconstructionReport {
  std::vector<RecoveredDirection> recovered_directions;
  std::vector<Match> matches;
  std::optional<std::vector<std::size_t>> architecture;
  std::string architecture_status = "not attempted";
  std::uint64_t oracle_queries = 0;
  std::vector<KinkRecord> kinks;
  /// Parameter values of the kinks (1-D oracles only).
  std::vector<double> kink_locations;
  std::vector<SheetRecord> sheets;
  std::vector<CrossCheck> crosschecks;
  std::size_t lines_scanned = 0;
  bool budget_exhausted = false;
};

namespace detail {

inline double norm2(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

/// Classification of a normal when the layer boundaries are unknown: the
/// first-layer column of target j occupies flat entries [(j-1) d1, j d1).
inline InputCandidate classify_blind(std::span<const double> normal, std::size_t d1, double support_tol) {
  InputCandidate out;
  double top = 0.0;
  for (double x : normal) top = std::max(top, std::abs(x));
  if (top == 0.0) return out;
  std::vector<std::size_t> support;
  for (std::size_t v = 0; v < normal.size(); ++v) {
    if (std::abs(normal[v]) >= support_tol * top) support.push_back(v);
  }
  if (support.size() == 1) {
    out.kind = SheetKind::WeightParameter;
    out.weight = support.front();
    out.possible_one_hot = support.front() < d1;
    return out;
  }
  const std::size_t block = support.front() / d1;
  for (std::size_t v : support) {
    if (v / d1 != block) return out;
  }
  out.kind = SheetKind::FirstLayer;
  out.target = block + 1;
  out.direction.assign(d1, 0.0);
  for (std::size_t v : support) out.direction[v - block * d1] = normal[v];
  const double n = norm2(out.direction);
  for (auto& x : out.direction) x /= n;
  orient(out.direction);
  return out;
}

struct KnownPlane {
  std::vector<double> normal;
  std::vector<double> point;
};

inline bool on_known_plane(const std::vector<KnownPlane>& planes, std::span<const double> p, double tol) {
  for (const auto& pl : planes) {
    double d = 0.0;
    for (std::size_t v = 0; v < p.size(); ++v) d += pl.normal[v] * (p[v] - pl.point[v]);
    if (std::abs(d) <= tol) return true;
  }
  return false;
}

}  // namespace detail

/// Region-fit cross-check of one recovered direction: fit the loss pieces
/// on both sides of the fitted plane and read the direction off their
/// difference.
inline CrossCheck regionfit_crosscheck(const LossOracle& oracle, const NetworkShape& shape,
                                       const RecoveredDirection& rd, std::span<const double> point, double radius,
                                       const AttackConfig& config, std::size_t index) {
  CrossCheck cc;
  cc.direction = index;
  const std::size_t n = oracle.dimension();
  if (monomial_count(n, config.degree) > config.monomial_cap) {
    cc.status = "skipped: monomial basis over cap";
    return cc;
  }
  RegionFitOptions ro;
  ro.monomial_cap = config.monomial_cap;
  ro.seed = config.seed + index;
  KinkOptions ko;
  ko.degree = config.degree;
  ko.tol = config.tol;
  // Large balls keep the fitted coefficients accurate; smaller ones are
  // tried when a large ball reaches another wall.
  const double pnorm = detail::norm2(point);
  cc.status = "contaminated";
  for (double ball = 0.1 * std::max(1.0, pnorm); ball >= radius; ball *= 0.5) {
    std::vector<double> plus(point.begin(), point.end());
    std::vector<double> minus(point.begin(), point.end());
    for (std::size_t v = 0; v < n; ++v) {
      plus[v] += 2.0 * ball * rd.normal[v];
      minus[v] -= 2.0 * ball * rd.normal[v];
    }
    try {
      // The segment between the two centers must cross this wall only.
      const Line across{std::vector<double>(point.begin(), point.end()), rd.normal};
      const auto between = detect_kinks_on_line(oracle, across, -2.0 * ball, 2.0 * ball, config.grid, ko);
      if (between.kinks.size() != 1 || !between.rejected.empty()) continue;
      const auto f = fit_region_polynomial(oracle, plus, config.degree, ball, ro, ko);
      const auto g = fit_region_polynomial(oracle, minus, config.degree, ball, ro, ko);
      // Fit errors grow like ball^-degree once expanded into weight coordinates.
      const double noise = std::max(1e-7, 1e-13 * std::pow(ball, -static_cast<double>(config.degree)));
      const auto diff = region_difference_direction(f.poly, g.poly, shape, point, config.support_tol, noise);
      if (!diff.linear || !diff.candidate || diff.candidate->kind != SheetKind::FirstLayer) {
        cc.status = "not linear";
        return cc;
      }
      cc.abs_cos = abs_cosine(diff.candidate->direction, rd.direction);
      cc.status = "ok";
      return cc;
    } catch (const ContaminationError&) {
      continue;
    } catch (const OracleBudgetExhausted&) {
      throw;
    } catch (const BudgetError&) {
      cc.status = "skipped: monomial basis over cap";
      return cc;
    }
  }
  return cc;
}

/// Runs the reconstruction against `oracle`, which must have dimension n.
/// Queries stop at config.budget; running out ends the attack early and the
/// report keeps everything found so far.
inline ReconstructionReport run_attack(LossOracle& oracle, std::size_t n, std::size_t d1,
                                       const AttackConfig& config) {
  if (oracle.dimension() != n) throw ShapeError("oracle dimension differs from N");
  if (config.budget == 0) throw ValidationError("attack budget must be positive");
  if (d1 == 0) throw ValidationError("input width must be positive");
  std::optional<NetworkShape> shape;
  if (!config.widths_hint.empty()) {
    shape.emplace(config.widths_hint);
    if (shape->weight_count() != n || shape->input_width() != d1) {
      throw ValidationError("widths hint does not match the oracle");
    }
  }
  const std::uint64_t start = oracle.query_count();
  oracle.set_budget(start + config.budget);

  KinkOptions ko;
  ko.degree = config.degree;
  ko.tol = config.tol;

  ReconstructionReport report;
  auto add_direction = [&](RecoveredDirection rd) {
    for (const auto& existing : report.recovered_directions) {
      if (abs_cosine(existing.direction, rd.direction) >= config.dedup_cos) return false;
    }
    report.recovered_directions.push_back(std::move(rd));
    return true;
  };

  try {
    if (n == 1) {
      // Line model: a kink at a* is the sample (1, a*) up to scale.
      Line line{{0.0}, {1.0}};
      const auto scan = detect_kinks_on_line(oracle, line, config.t_lo, config.t_hi, config.grid, ko);
      report.lines_scanned = 1;
      for (const auto& [lo, hi] : scan.rejected) report.kinks.push_back({0, 0.5 * (lo + hi), 0.0, false});
      for (const auto& k : scan.kinks) {
        report.kinks.push_back({0, k.t, k.jump_magnitude, true});
        report.kink_locations.push_back(k.t);
        RecoveredDirection rd;
        rd.direction = {1.0, k.t};
        const double s = detail::norm2(rd.direction);
        for (auto& x : rd.direction) x /= s;
        rd.target = 1;
        rd.kink = report.kinks.size() - 1;
        add_direction(std::move(rd));
      }
    } else if (config.hyperplane_path) {
      std::vector<detail::KnownPlane> planes;
      for (std::size_t l = 0; l < config.max_lines; ++l) {
        auto rng = make_stream(config.seed, l);
        Line line;
        line.base.resize(n);
        for (auto& x : line.base) x = config.box * (2.0 * uniform_unit(rng) - 1.0);
        line.direction = random_unit_vector(rng, n);
        const auto scan = detect_kinks_on_line(oracle, line, config.t_lo, config.t_hi, config.grid, ko);
        report.lines_scanned = l + 1;
        for (const auto& [lo, hi] : scan.rejected) report.kinks.push_back({l, 0.5 * (lo + hi), 0.0, false});
        for (const auto& k : scan.kinks) {
          report.kinks.push_back({l, k.t, k.jump_magnitude, true});
          const std::size_t kink_id = report.kinks.size() - 1;
          const double pnorm = detail::norm2(k.location);
          double radius = config.radius > 0 ? config.radius : 1e-3 * std::max(pnorm, 1e-3);
          if (detail::on_known_plane(planes, k.location, 1e-3 * radius)) continue;

          SheetRecord rec;
          rec.kink = kink_id;
          std::optional<HyperplaneFit> fit;
          for (std::size_t attempt = 0; attempt < config.harvest_attempts && !fit; ++attempt) {
            try {
              HarvestOptions ho;
              const auto pts = harvest_sheet_points(oracle, k, n, radius, rng, ko, ho);
              fit = fit_hyperplane(pts);
            } catch (const HarvestError&) {
              radius *= 0.5;
            } catch (const DegeneracyError&) {
              radius *= 0.5;
            }
          }
          if (!fit) {
            rec.note = "harvest failed";
            report.sheets.push_back(rec);
            continue;
          }
          rec.residual = fit->residual;
          rec.accepted = fit->residual <= config.residual_tol * radius;
          const InputCandidate cand = shape ? extract_input_direction(fit->normal, *shape, config.support_tol)
                                            : detail::classify_blind(fit->normal, d1, config.support_tol);
          rec.kind = cand.kind;
          rec.possible_one_hot = cand.possible_one_hot;
          if (!rec.accepted) rec.note = "residual above tolerance";
          report.sheets.push_back(rec);
          if (!rec.accepted) continue;
          planes.push_back({fit->normal, k.location});
          if (cand.kind != SheetKind::FirstLayer) continue;
          RecoveredDirection rd;
          rd.direction = cand.direction;
          rd.target = cand.target;
          rd.residual = fit->residual;
          rd.normal = fit->normal;
          rd.kink = kink_id;
          const std::size_t index = report.recovered_directions.size();
          if (add_direction(rd) && config.regionfit_path && shape) {
            report.crosschecks.push_back(
                regionfit_crosscheck(oracle, *shape, rd, k.location, radius, config, index));
          }
        }
      }
    }
  } catch (const OracleBudgetExhausted&) {
    report.budget_exhausted = true;
  }
  report.oracle_queries = oracle.query_count() - start;
  return report;
}

/// Pairs every recovered direction with the true input it is closest to.
/// Only pairs reaching config.match_cos are kept.
inline void score_report(ReconstructionReport& report, std::span<const std::vector<double>> true_inputs,
                         double match_cos) {
  report.matches.clear();
  for (std::size_t d = 0; d < report.recovered_directions.size(); ++d) {
    const auto& dir = report.recovered_directions[d].direction;
    std::optional<Match> best;
    for (std::size_t s = 0; s < true_inputs.size(); ++s) {
      if (true_inputs[s].size() != dir.size()) throw ShapeError("true input width differs from the direction");
      const double c = abs_cosine(dir, true_inputs[s]);
      if (!best || c > best->abs_cos) {
        double dot = 0.0;
        for (std::size_t i = 0; i < dir.size(); ++i) dot += dir[i] * true_inputs[s][i];
        best = Match{d, s, c, dot};
      }
    }
    if (best && best->abs_cos >= match_cos) report.matches.push_back(*best);
  }
}

}  // namespace losscarto
