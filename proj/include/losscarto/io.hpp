#pragma once

// File formats: instances, polynomials, sheet reports, attack configs and
// reports. All JSON goes through nlohmann::json; files are written to a
// temporary name and renamed into place.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "losscarto/attack.hpp"
#include "losscarto/errors.hpp"
#include "losscarto/network.hpp"
#include "losscarto/poly.hpp"
#include "losscarto/random.hpp"
#include "losscarto/rational.hpp"
#include "losscarto/surface.hpp"
#include "losscarto/virtual.hpp"

namespace losscarto {

using Json = nlohmann::ordered_json;

// ---------------------------------------------------------------------------
// Files.

inline std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  if (in.bad()) throw IoError("error while reading " + path.string());
  return ss.str();
}

inline void write_file_atomic(const std::filesystem::path& path, const std::string& content) {
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + path.string());
    out << content;
    out.flush();
    if (!out) {
      std::error_code ec;
      std::filesystem::remove(tmp, ec);
      throw IoError("error while writing " + path.string());
    }
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp, ec);
    throw IoError("cannot move output into place at " + path.string());
  }
}

inline Json parse_json(const std::string& text, const std::string& what) {
  try {
    return Json::parse(text);
  } catch (const Json::parse_error& e) {
    throw ValidationError(what + " is not valid JSON: " + e.what());
  }
}

// ---------------------------------------------------------------------------
// Instances.

struct SliceSpec {
  std::vector<double> base;
  std::vector<double> direction;
  double t_lo = -1.0;
  double t_hi = 1.0;
};

struct Instance {
  std::vector<std::size_t> widths;
  std::vector<double> weights;
  std::vector<Sample> samples;
  std::uint64_t seed = 0;
  std::optional<SliceSpec> slice;

  NetworkShape shape() const { return NetworkShape(widths); }

  std::vector<std::vector<double>> inputs() const {
    std::vector<std::vector<double>> out;
    for (const auto& s : samples) out.push_back(s.input);
    return out;
  }
};

/// Weights and samples uniform on [-1, 1) with 20 fractional bits, so the
/// values are exact both as doubles and as rationals.
inline Instance generate_instance(const std::vector<std::size_t>& widths, std::size_t sample_count,
                                  std::uint64_t seed) {
  if (sample_count == 0) throw ValidationError("at least one sample is required");
  const NetworkShape shape(widths);
  Instance inst;
  inst.widths = widths;
  inst.seed = seed;
  auto wrng = make_stream(seed, 1);
  inst.weights.resize(shape.weight_count());
  for (auto& w : inst.weights) w = uniform_dyadic(wrng);
  auto srng = make_stream(seed, 2);
  inst.samples.resize(sample_count);
  for (auto& s : inst.samples) {
    s.input.resize(shape.input_width());
    for (auto& x : s.input) x = uniform_dyadic(srng);
    s.output.resize(shape.output_width());
    for (auto& y : s.output) y = uniform_dyadic(srng);
  }
  return inst;
}

namespace detail {

inline std::vector<double> number_array(const Json& j, const std::string& what) {
  if (!j.is_array()) throw ValidationError(what + " must be an array of numbers");
  std::vector<double> out;
  for (const auto& x : j) {
    if (!x.is_number()) throw ValidationError(what + " must be an array of numbers");
    out.push_back(x.get<double>());
  }
  return out;
}

}  // namespace detail

inline Instance instance_from_json(const Json& j) {
  if (!j.is_object()) throw ValidationError("instance must be a JSON object");
  Instance inst;
  if (!j.contains("widths") || !j["widths"].is_array()) throw ValidationError("instance needs a widths array");
  for (const auto& w : j["widths"]) {
    if (!w.is_number_integer() || w.get<long long>() <= 0) throw ValidationError("widths must be positive integers");
    inst.widths.push_back(w.get<std::size_t>());
  }
  const NetworkShape shape(inst.widths);
  inst.seed = j.value("seed", std::uint64_t{0});
  if (j.contains("weights")) {
    inst.weights = detail::number_array(j["weights"], "weights");
    if (inst.weights.size() != shape.weight_count()) {
      throw ValidationError("instance has " + std::to_string(inst.weights.size()) + " weights, shape needs " +
                            std::to_string(shape.weight_count()));
    }
  } else {
    inst.weights = generate_instance(inst.widths, 1, inst.seed).weights;
  }
  if (!j.contains("samples") || !j["samples"].is_array() || j["samples"].empty()) {
    throw ValidationError("instance needs a nonempty samples array");
  }
  for (const auto& s : j["samples"]) {
    if (!s.is_object() || !s.contains("input") || !s.contains("output")) {
      throw ValidationError("each sample needs input and output");
    }
    Sample smp{detail::number_array(s["input"], "sample input"), detail::number_array(s["output"], "sample output")};
    if (smp.input.size() != shape.input_width() || smp.output.size() != shape.output_width()) {
      throw ValidationError("sample dimensions do not match the widths");
    }
    inst.samples.push_back(std::move(smp));
  }
  if (j.contains("slice")) {
    const auto& s = j["slice"];
    SliceSpec spec;
    spec.base = s.contains("base") ? detail::number_array(s["base"], "slice base") : inst.weights;
    spec.direction = detail::number_array(s.at("direction"), "slice direction");
    if (s.contains("range")) {
      const auto r = detail::number_array(s["range"], "slice range");
      if (r.size() != 2 || !(r[0] < r[1])) throw ValidationError("slice range must be [lo, hi] with lo < hi");
      spec.t_lo = r[0];
      spec.t_hi = r[1];
    }
    if (spec.base.size() != shape.weight_count() || spec.direction.size() != shape.weight_count()) {
      throw ValidationError("slice vectors must have one entry per weight");
    }
    inst.slice = std::move(spec);
  }
  return inst;
}

inline Json to_json(const Instance& inst) {
  Json j;
  j["widths"] = inst.widths;
  j["seed"] = inst.seed;
  j["weights"] = inst.weights;
  Json samples = Json::array();
  for (const auto& s : inst.samples) samples.push_back({{"input", s.input}, {"output", s.output}});
  j["samples"] = samples;
  if (inst.slice) {
    j["slice"] = {{"base", inst.slice->base},
                  {"direction", inst.slice->direction},
                  {"range", {inst.slice->t_lo, inst.slice->t_hi}}};
  }
  return j;
}

inline Instance load_instance(const std::filesystem::path& path) {
  try {
    return instance_from_json(parse_json(read_text_file(path), path.string()));
  } catch (const Json::exception& e) {
    throw ValidationError(path.string() + ": " + e.what());
  } catch (const ShapeError& e) {
    throw ValidationError(path.string() + ": " + e.what());
  }
}

// ---------------------------------------------------------------------------
// Polynomials: [{"coeff": "p/q", "exps": {"var": exponent, ...}}, ...] in
// canonical term order.

inline Json to_json(const Poly& p) {
  Json terms = Json::array();
  for (const auto& t : p.terms()) {
    Json exps = Json::object();
    for (const auto& [v, e] : t.monomial.factors()) exps[std::to_string(v)] = e;
    terms.push_back({{"coeff", rational_string(t.coeff)}, {"exps", exps}});
  }
  return terms;
}

inline Poly poly_from_json(const Json& j) {
  if (!j.is_array()) throw ValidationError("polynomial must be an array of terms");
  std::vector<Term<Rational>> terms;
  for (const auto& t : j) {
    std::vector<Monomial::Factor> factors;
    for (const auto& [k, e] : t.at("exps").items()) {
      factors.emplace_back(static_cast<Var>(std::stoul(k)), e.get<std::uint32_t>());
    }
    terms.push_back({Monomial::from_factors(std::move(factors)), parse_rational(t.at("coeff").get<std::string>())});
  }
  return Poly::from_terms(std::move(terms));
}

inline Json to_json(const ActivationSet& set) {
  Json j = Json::object();
  for (std::size_t s = 0; s < set.hidden_count(); ++s) {
    const auto [k, i] = set.node_of_slot(s);
    j[std::to_string(k) + ":" + std::to_string(i)] = set.flag(s) ? "active" : "negative";
  }
  return j;
}

inline Json to_json(const SheetSet& set) {
  Json arr = Json::array();
  for (const auto& s : set.sheets) {
    Json e;
    e["poly"] = to_json(s.poly);
    if (s.sample_index) {
      e["sample_index"] = *s.sample_index;
    } else {
      e["sample_index"] = "independent";
    }
    e["singular"] = s.singular;
    arr.push_back(e);
  }
  return arr;
}

// ---------------------------------------------------------------------------
// Attack config and report.

inline AttackConfig attack_config_from_json(const Json& j, AttackConfig cfg = {}) {
  if (!j.is_object()) throw ValidationError("attack config must be a JSON object");
  try {
    if (j.contains("budget")) {
      const long long b = j["budget"].get<long long>();
      if (b <= 0) throw UsageError("budget must be positive");
      cfg.budget = static_cast<std::uint64_t>(b);
    }
    if (j.contains("grid")) cfg.grid = j["grid"].get<std::size_t>();
    if (j.contains("tol")) cfg.tol = j["tol"].get<double>();
    if (j.contains("radius")) cfg.radius = j["radius"].get<double>();
    if (j.contains("seed")) cfg.seed = j["seed"].get<std::uint64_t>();
    if (j.contains("paths")) {
      cfg.hyperplane_path = false;
      cfg.regionfit_path = false;
      for (const auto& p : j["paths"]) {
        const auto name = p.get<std::string>();
        if (name == "hyperplane") {
          cfg.hyperplane_path = true;
        } else if (name == "regionfit") {
          cfg.regionfit_path = true;
        } else {
          throw UsageError("unknown attack path '" + name + "'");
        }
      }
    }
    if (j.contains("degree")) cfg.degree = j["degree"].get<std::size_t>();
    if (j.contains("t_range")) {
      const auto r = detail::number_array(j["t_range"], "t_range");
      if (r.size() != 2 || !(r[0] < r[1])) throw ValidationError("t_range must be [lo, hi] with lo < hi");
      cfg.t_lo = r[0];
      cfg.t_hi = r[1];
    }
    if (j.contains("box")) cfg.box = j["box"].get<double>();
    if (j.contains("max_lines")) cfg.max_lines = j["max_lines"].get<std::size_t>();
    if (j.contains("support_tol")) cfg.support_tol = j["support_tol"].get<double>();
    if (j.contains("residual_tol")) cfg.residual_tol = j["residual_tol"].get<double>();
    if (j.contains("widths_hint")) cfg.widths_hint = j["widths_hint"].get<std::vector<std::size_t>>();
    if (j.contains("monomial_cap")) cfg.monomial_cap = j["monomial_cap"].get<std::uint64_t>();
    if (j.contains("match_cos")) cfg.match_cos = j["match_cos"].get<double>();
  } catch (const Json::exception& e) {
    throw ValidationError(std::string("bad attack config: ") + e.what());
  }
  return cfg;
}

inline Json to_json(const AttackConfig& c) {
  Json paths = Json::array();
  if (c.hyperplane_path) paths.push_back("hyperplane");
  if (c.regionfit_path) paths.push_back("regionfit");
  Json j;
  j["budget"] = c.budget;
  j["grid"] = c.grid;
  j["tol"] = c.tol;
  j["radius"] = c.radius;
  j["seed"] = c.seed;
  j["paths"] = paths;
  j["degree"] = c.degree;
  j["t_range"] = {c.t_lo, c.t_hi};
  j["box"] = c.box;
  j["max_lines"] = c.max_lines;
  j["support_tol"] = c.support_tol;
  j["residual_tol"] = c.residual_tol;
  if (!c.widths_hint.empty()) j["widths_hint"] = c.widths_hint;
  j["monomial_cap"] = c.monomial_cap;
  j["match_cos"] = c.match_cos;
  return j;
}

inline Json to_json(const ReconstructionReport& r) {
  Json j;
  Json dirs = Json::array();
  for (const auto& d : r.recovered_directions) {
    dirs.push_back({{"direction", d.direction}, {"target", d.target}, {"residual", d.residual}, {"kink", d.kink}});
  }
  j["recovered_directions"] = dirs;
  Json matches = Json::array();
  for (const auto& m : r.matches) {
    matches.push_back({{"direction", m.direction}, {"sample", m.sample}, {"abs_cos", m.abs_cos}, {"scale", m.scale}});
  }
  j["matches"] = matches;
  if (r.architecture) {
    j["architecture"] = *r.architecture;
  } else {
    j["architecture"] = r.architecture_status;
  }
  j["oracle_queries"] = r.oracle_queries;
  j["budget_exhausted"] = r.budget_exhausted;
  j["lines_scanned"] = r.lines_scanned;
  j["kink_locations"] = r.kink_locations;
  Json sheets = Json::array();
  for (const auto& s : r.sheets) {
    Json e{{"kink", s.kink}, {"kind", to_string(s.kind)}, {"residual", s.residual}, {"accepted", s.accepted}};
    if (s.possible_one_hot) e["possible_one_hot"] = true;
    if (!s.note.empty()) e["note"] = s.note;
    sheets.push_back(e);
  }
  j["sheets"] = sheets;
  Json cc = Json::array();
  for (const auto& c : r.crosschecks) cc.push_back({{"direction", c.direction}, {"status", c.status}, {"abs_cos", c.abs_cos}});
  j["crosschecks"] = cc;
  return j;
}

inline std::string format_double(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

inline std::string kinks_csv(const ReconstructionReport& r) {
  std::string out = "line_id,t,jump,refined\n";
  for (const auto& k : r.kinks) {
    out += std::to_string(k.line_id) + "," + format_double(k.t) + "," + format_double(k.jump) + "," +
           (k.refined ? "1" : "0") + "\n";
  }
  return out;
}

inline std::string slice_csv(const std::vector<std::pair<double, double>>& rows) {
  std::string out = "t,E\n";
  for (const auto& [t, e] : rows) out += format_double(t) + "," + format_double(e) + "\n";
  return out;
}

}  // namespace losscarto
