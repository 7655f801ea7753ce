#pragma once

// Command implementations behind the losscarto executable. Each returns the
// process exit code and reports problems on `err`.

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "losscarto/attack.hpp"
#include "losscarto/errors.hpp"
#include "losscarto/io.hpp"
#include "losscarto/network.hpp"
#include "losscarto/oracle.hpp"
#include "losscarto/poly.hpp"
#include "losscarto/surface.hpp"
#include "losscarto/virtual.hpp"

namespace losscarto {

enum ExitCode : int { kExitOk = 0, kExitValidation = 1, kExitIo = 2, kExitNoRecovery = 3, kExitUsage = 64 };

/// Runs `body`, translating library errors into exit codes.
template <class F>
int guarded(std::ostream& err, F&& body) {
  try {
    return body();
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const IoError& e) {
    err << "i/o error: " << e.what() << "\n";
    return kExitIo;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return kExitValidation;
  }
}

inline std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item.erase(0, item.find_first_not_of(" \t"));
    item.erase(item.find_last_not_of(" \t") + 1);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

inline std::vector<double> parse_number_list(const std::string& s, const std::string& what) {
  std::vector<double> out;
  for (const auto& item : split_list(s)) {
    try {
      std::size_t used = 0;
      out.push_back(std::stod(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw UsageError(what + ": '" + item + "' is not a number");
    }
  }
  return out;
}

inline std::filesystem::path sibling_path(const std::filesystem::path& out, const std::string& suffix) {
  std::filesystem::path p = out;
  p += suffix;
  return p;
}

// ---------------------------------------------------------------------------
// gen

struct GenOptions {
  std::vector<std::size_t> widths;
  std::size_t samples = 1;
  std::uint64_t seed = 0;
  std::filesystem::path out;
};

inline int cmd_gen(const GenOptions& o, std::ostream& err = std::cerr) {
  return guarded(err, [&] {
    const Instance inst = generate_instance(o.widths, o.samples, o.seed);
    write_file_atomic(o.out, to_json(inst).dump(2) + "\n");
    return int{kExitOk};
  });
}

// ---------------------------------------------------------------------------
// verify

struct VerifyOptions {
  std::filesystem::path instance;
  std::vector<std::string> checks{"homogeneity", "factorization", "piecewise", "independent"};
  /// Empty: write the report to `report_stream`.
  std::filesystem::path out;
  std::uint64_t seed = 0;
  std::size_t points = 200;
  std::size_t probes = 400;
  std::size_t enumeration_cap = 16;
};

struct CheckResult {
  std::string name;
  bool pass = true;
  Json details = Json::object();
  Json failures = Json::array();
};

namespace detail {

inline std::vector<NodeId> non_input_nodes(const NetworkShape& shape) {
  std::vector<NodeId> out;
  for (std::size_t k = 2; k <= shape.layers(); ++k) {
    for (std::size_t i = 1; i <= shape.width(k); ++i) out.push_back({i, k});
  }
  return out;
}

inline Json node_json(NodeId n) { return Json{{"layer", n.layer}, {"node", n.node}}; }

inline CheckResult check_homogeneity(const NetworkShape& shape, const std::vector<ExactSample>& samples,
                                     std::size_t cap) {
  CheckResult r{"homogeneity"};
  std::size_t checked = 0;
  for (std::size_t p = 0; p < samples.size(); ++p) {
    for (const NodeId n : non_input_nodes(shape)) {
      const auto expected = MultiDegree::leading_ones(shape.weight_layers(), n.layer - 1);
      for (const auto& vp : enumerate_virtual_polynomials(shape, samples[p].input, n, cap)) {
        if (vp.poly.is_zero()) continue;
        ++checked;
        const auto deg = layerwise_degree(vp.poly, shape);
        if (!deg || *deg != expected) {
          r.pass = false;
          r.failures.push_back({{"sample", p}, {"node", node_json(n)}, {"flags", to_json(vp.witness)},
                                {"poly", to_json(vp.poly)}});
        }
      }
    }
  }
  r.details["polynomials_checked"] = checked;
  return r;
}

inline CheckResult check_factorization(const NetworkShape& shape, const std::vector<ExactSample>& samples,
                                       std::size_t cap) {
  CheckResult r{"factorization"};
  std::size_t checked = 0;
  std::size_t max_factors = 0;
  std::map<std::size_t, std::size_t> histogram;
  for (std::size_t p = 0; p < samples.size(); ++p) {
    for (const NodeId n : non_input_nodes(shape)) {
      for (const auto& vp : enumerate_virtual_polynomials(shape, samples[p].input, n, cap)) {
        if (vp.poly.is_zero()) continue;
        ++checked;
        const auto f = factorize(shape, samples[p].input, vp.witness, n);
        Poly prod = Poly::constant(Rational(1));
        for (const auto& factor : f.factors) prod = prod * factor.poly;
        const auto bn = bottleneck_layers(p_active_network(shape, vp.witness));
        // Only bottlenecks strictly between the input and the target split.
        std::size_t cuts = 0;
        for (std::size_t k : bn.bottlenecks) cuts += (k > 1 && k < n.layer) ? 1 : 0;
        const bool ok = prod == vp.poly && f.product == vp.poly && f.factors.size() == cuts + 1;
        max_factors = std::max(max_factors, f.factors.size());
        ++histogram[f.factors.size()];
        if (!ok) {
          r.pass = false;
          r.failures.push_back({{"sample", p}, {"node", node_json(n)}, {"flags", to_json(vp.witness)},
                                {"factors", f.factors.size()}, {"expected_factors", cuts + 1}});
        }
      }
    }
  }
  r.details["polynomials_checked"] = checked;
  r.details["max_factors"] = max_factors;
  Json counts = Json::object();
  for (const auto& [k, c] : histogram) counts[std::to_string(k)] = c;
  r.details["factor_counts"] = counts;
  return r;
}

inline CheckResult check_piecewise(const NetworkShape& shape, const std::vector<ExactSample>& samples,
                                   const std::vector<double>& weights, std::size_t points, std::uint64_t seed) {
  CheckResult r{"piecewise"};
  std::size_t checked = 0;
  std::size_t boundary = 0;
  for (std::size_t t = 0; t <= points; ++t) {
    std::vector<Rational> w;
    if (t == 0) {
      w = to_rational(std::span<const double>(weights));
    } else {
      auto rng = make_stream(seed, 0x7069656365ULL + t);
      w.resize(shape.weight_count());
      for (auto& x : w) x = to_rational(uniform_dyadic(rng));
    }
    Region region;
    try {
      region = region_of(shape, samples, std::span<const Rational>(w));
    } catch (const BoundaryError&) {
      ++boundary;
      continue;
    }
    ++checked;
    const Poly piece = region_loss_polynomial(shape, samples, region);
    const Rational symbolic = piece.evaluate<Rational>(w);
    const Rational numeric = loss<Rational>(shape, std::span<const Rational>(w), std::span<const ExactSample>(samples));
    if (symbolic != numeric) {
      r.pass = false;
      Json pt = Json::array();
      for (const auto& x : w) pt.push_back(rational_string(x));
      r.failures.push_back({{"point", pt}, {"piece", rational_string(symbolic)}, {"loss", rational_string(numeric)}});
    }
  }
  r.details["points_checked"] = checked;
  r.details["points_on_walls"] = boundary;
  return r;
}

inline CheckResult check_independent(const NetworkShape& shape, const std::vector<ExactSample>& samples,
                                     std::size_t probes, std::uint64_t seed) {
  CheckResult r{"independent"};
  // Second sample set: fresh draws of the same size.
  auto rng = make_stream(seed, 0x696e646570ULL);
  std::vector<ExactSample> other(samples.size());
  for (auto& s : other) {
    for (std::size_t i = 0; i < shape.input_width(); ++i) s.input.push_back(to_rational(uniform_dyadic(rng)));
    for (std::size_t i = 0; i < shape.output_width(); ++i) s.output.push_back(to_rational(uniform_dyadic(rng)));
  }
  const auto common = sample_independent_sheets(shape, samples, other, probes, seed);
  Json sheets = Json::array();
  for (const auto& p : common) {
    sheets.push_back(to_json(p));
    if (!input_free(p, shape) || p.is_constant()) {
      r.pass = false;
      r.failures.push_back({{"poly", to_json(p)}});
    }
  }
  r.details["sheets"] = sheets;
  return r;
}

}  // namespace detail

inline int cmd_verify(const VerifyOptions& o, std::ostream& report_stream = std::cout,
                      std::ostream& err = std::cerr) {
  return guarded(err, [&] {
    static const std::set<std::string> known{"homogeneity", "factorization", "piecewise", "independent"};
    for (const auto& c : o.checks) {
      if (!known.count(c)) throw UsageError("unknown check '" + c + "'");
    }
    if (o.checks.empty()) throw UsageError("no checks selected");
    const Instance inst = load_instance(o.instance);
    const NetworkShape shape = inst.shape();
    const auto samples = to_exact(std::span<const Sample>(inst.samples));

    std::vector<CheckResult> results;
    for (const auto& c : o.checks) {
      if (c == "homogeneity") results.push_back(detail::check_homogeneity(shape, samples, o.enumeration_cap));
      if (c == "factorization") results.push_back(detail::check_factorization(shape, samples, o.enumeration_cap));
      if (c == "piecewise") results.push_back(detail::check_piecewise(shape, samples, inst.weights, o.points, o.seed));
      if (c == "independent") results.push_back(detail::check_independent(shape, samples, o.probes, o.seed));
    }
    bool all = true;
    Json checks = Json::array();
    for (const auto& r : results) {
      all = all && r.pass;
      checks.push_back({{"name", r.name}, {"pass", r.pass}, {"details", r.details}, {"failures", r.failures}});
    }
    Json report{{"instance", o.instance.string()}, {"pass", all}, {"checks", checks}};
    if (o.out.empty()) {
      report_stream << report.dump(2) << "\n";
    } else {
      write_file_atomic(o.out, report.dump(2) + "\n");
    }
    for (const auto& r : results) err << r.name << ": " << (r.pass ? "pass" : "FAIL") << "\n";
    return all ? int{kExitOk} : int{kExitValidation};
  });
}

// ---------------------------------------------------------------------------
// attack

struct AttackOptions {
  std::filesystem::path instance;
  AttackConfig config;
  std::filesystem::path out;
  /// Empty: <out>.kinks.csv.
  std::filesystem::path kinks_out;
};

/// Builds the oracle the attack sees. With a slice in the instance the
/// oracle is the loss along that line; otherwise it is the full loss.
inline std::unique_ptr<LossOracle> instance_oracle(const Instance& inst) {
  const NetworkShape shape = inst.shape();
  if (inst.slice) return make_line_oracle(shape, inst.samples, inst.slice->base, inst.slice->direction);
  return make_loss_oracle(shape, inst.samples);
}

inline int cmd_attack(const AttackOptions& o, ReconstructionReport* result = nullptr,
                      std::ostream& err = std::cerr) {
  return guarded(err, [&] {
    if (o.config.budget == 0) throw UsageError("budget must be positive");
    const Instance inst = load_instance(o.instance);
    AttackConfig cfg = o.config;
    if (inst.slice) {
      cfg.t_lo = inst.slice->t_lo;
      cfg.t_hi = inst.slice->t_hi;
      cfg.widths_hint.clear();
    }
    const auto oracle = instance_oracle(inst);
    ReconstructionReport report = run_attack(*oracle, oracle->dimension(), inst.shape().input_width(), cfg);
    const auto truth = inst.inputs();
    score_report(report, truth, cfg.match_cos);
    Json j = to_json(report);
    j["config"] = to_json(cfg);
    write_file_atomic(o.out, j.dump(2) + "\n");
    write_file_atomic(o.kinks_out.empty() ? sibling_path(o.out, ".kinks.csv") : o.kinks_out, kinks_csv(report));
    err << "queries " << report.oracle_queries << ", directions " << report.recovered_directions.size()
        << ", matches " << report.matches.size() << "\n";
    const bool recovered = !report.matches.empty();
    if (result) *result = std::move(report);
    return recovered ? int{kExitOk} : int{kExitNoRecovery};
  });
}

// ---------------------------------------------------------------------------
// surface

struct SurfaceOptions {
  std::filesystem::path instance;
  /// Empty: the instance's slice direction, else a random unit direction.
  std::vector<double> direction;
  std::optional<std::pair<double, double>> range;
  std::size_t count = 201;
  std::filesystem::path out;
  /// Empty: <out>.sheets.json.
  std::filesystem::path sheets_out;
  std::size_t probes = 400;
  std::uint64_t seed = 0;
};

inline int cmd_surface(const SurfaceOptions& o, std::ostream& err = std::cerr) {
  return guarded(err, [&] {
    const Instance inst = load_instance(o.instance);
    const NetworkShape shape = inst.shape();
    std::vector<double> base = inst.slice ? inst.slice->base : inst.weights;
    std::vector<double> dir = o.direction;
    if (dir.empty()) {
      if (inst.slice) {
        dir = inst.slice->direction;
      } else {
        auto rng = make_stream(o.seed, 0x736c696365ULL);
        dir = random_unit_vector(rng, shape.weight_count());
      }
    }
    double lo = -1.0, hi = 1.0;
    if (inst.slice) {
      lo = inst.slice->t_lo;
      hi = inst.slice->t_hi;
    }
    if (o.range) std::tie(lo, hi) = *o.range;
    if (!(lo < hi)) throw ValidationError("slice range must satisfy lo < hi");
    if (o.count < 2) throw ValidationError("a slice needs at least two samples");
    const auto rows = surface_slice(shape, base, dir, inst.samples, lo, hi, o.count);
    const auto samples = to_exact(std::span<const Sample>(inst.samples));
    const auto sheets = enumerate_singular_sheets(shape, samples, o.probes, o.seed);
    write_file_atomic(o.out, slice_csv(rows));
    write_file_atomic(o.sheets_out.empty() ? sibling_path(o.out, ".sheets.json") : o.sheets_out,
                      to_json(sheets).dump(2) + "\n");
    std::size_t singular = 0;
    for (const auto& s : sheets.sheets) singular += s.singular ? 1 : 0;
    err << "regions " << sheets.regions << ", sheets " << sheets.sheets.size() << ", singular " << singular << "\n";
    return int{kExitOk};
  });
}

}  // namespace losscarto
