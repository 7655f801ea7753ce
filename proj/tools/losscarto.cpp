// losscarto gen|verify|attack|surface

#include <CLI11.hpp>

#include <iostream>
#include <string>

#include "losscarto/cli.hpp"

using namespace losscarto;

namespace {

std::vector<std::size_t> parse_widths(const std::string& s) {
  std::vector<std::size_t> out;
  for (const auto& item : split_list(s)) {
    std::size_t used = 0;
    long long v = 0;
    try {
      v = std::stoll(item, &used);
    } catch (const std::exception&) {
      throw UsageError("widths: '" + item + "' is not an integer");
    }
    if (used != item.size()) throw UsageError("widths: '" + item + "' is not an integer");
    if (v <= 0) throw ValidationError("widths must be positive");
    out.push_back(static_cast<std::size_t>(v));
  }
  return out;
}

std::pair<double, double> parse_range(const std::string& s, const std::string& what) {
  const auto r = parse_number_list(s, what);
  if (r.size() != 2) throw UsageError(what + " needs two values lo,hi");
  return {r[0], r[1]};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Exact loss-surface models of ReLU networks and a loss-oracle reconstruction attack"};
  app.require_subcommand(1);
  std::uint64_t seed = 0;
  std::string instance;
  std::string out;

  auto* gen = app.add_subcommand("gen", "Generate a random instance");
  std::string widths;
  std::size_t sample_count = 1;
  gen->add_option("--widths", widths, "Layer widths, e.g. 2,2,1")->required();
  gen->add_option("--samples", sample_count, "Number of training samples");
  gen->add_option("--seed", seed, "Random seed");
  gen->add_option("--out", out, "Output instance JSON")->required();

  auto* verify = app.add_subcommand("verify", "Run symbolic verification suites on an instance");
  std::string checks = "homogeneity,factorization,piecewise,independent";
  VerifyOptions vo;
  verify->add_option("--instance", instance, "Instance JSON")->required();
  verify->add_option("--checks", checks, "Comma-separated: homogeneity,factorization,piecewise,independent");
  verify->add_option("--out", out, "Report JSON (default: stdout)");
  verify->add_option("--seed", seed, "Random seed");
  verify->add_option("--points", vo.points, "Random points for the piecewise check");
  verify->add_option("--probes", vo.probes, "Region probes for the sheet check");
  verify->add_option("--cap", vo.enumeration_cap, "Largest number of free flags to enumerate");

  auto* attack = app.add_subcommand("attack", "Recover training inputs from loss queries");
  std::string config_path;
  long long budget = 0;
  std::size_t grid = 0;
  double tol = 0, radius = -1;
  std::vector<std::string> paths;
  std::string kinks_out;
  std::string t_range;
  std::string widths_hint;
  std::size_t degree = 0;
  attack->add_option("--instance", instance, "Instance JSON")->required();
  attack->add_option("--out", out, "Report JSON")->required();
  attack->add_option("--config", config_path, "Attack config JSON");
  attack->add_option("--seed", seed, "Random seed");
  attack->add_option("--budget", budget, "Oracle query budget");
  attack->add_option("--grid", grid, "Grid points per probe line");
  attack->add_option("--tol", tol, "Kink flag threshold");
  attack->add_option("--radius", radius, "Harvest radius (0: automatic)");
  attack->add_option("--paths", paths, "hyperplane and/or regionfit")->delimiter(',');
  attack->add_option("--degree", degree, "Degree bound of the loss pieces along a line");
  attack->add_option("--t-range", t_range, "Probe line parameter range lo,hi");
  attack->add_option("--widths-hint", widths_hint, "Known widths of the attacked network");
  attack->add_option("--kinks-out", kinks_out, "Kink CSV (default: <out>.kinks.csv)");

  auto* surface = app.add_subcommand("surface", "Export a loss slice and the singular sheets");
  std::string slice_dir, slice_range, sheets_out;
  SurfaceOptions so;
  surface->add_option("--instance", instance, "Instance JSON")->required();
  surface->add_option("--out", out, "Slice CSV")->required();
  surface->add_option("--seed", seed, "Random seed");
  surface->add_option("--slice-dir", slice_dir, "Slice direction, comma-separated");
  surface->add_option("--slice-range", slice_range, "Slice range lo,hi");
  surface->add_option("--slice-samples", so.count, "Points along the slice");
  surface->add_option("--sheets-out", sheets_out, "Sheet report JSON (default: <out>.sheets.json)");
  surface->add_option("--probes", so.probes, "Region probes for the sheet enumeration");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  return guarded(std::cerr, [&]() -> int {
    if (*gen) {
      return cmd_gen({parse_widths(widths), sample_count, seed, out});
    }
    if (*verify) {
      vo.instance = instance;
      vo.checks = split_list(checks);
      vo.out = out;
      vo.seed = seed;
      return cmd_verify(vo);
    }
    if (*attack) {
      AttackOptions ao;
      ao.instance = instance;
      ao.out = out;
      ao.kinks_out = kinks_out;
      if (!config_path.empty()) {
        ao.config = attack_config_from_json(parse_json(read_text_file(config_path), config_path));
      }
      if (attack->count("--seed")) ao.config.seed = seed;
      if (attack->count("--budget")) {
        if (budget <= 0) throw UsageError("budget must be positive");
        ao.config.budget = static_cast<std::uint64_t>(budget);
      }
      if (attack->count("--grid")) ao.config.grid = grid;
      if (attack->count("--tol")) ao.config.tol = tol;
      if (attack->count("--radius")) ao.config.radius = radius;
      if (attack->count("--degree")) ao.config.degree = degree;
      if (attack->count("--paths")) {
        Json j{{"paths", paths}};
        ao.config = attack_config_from_json(j, ao.config);
      }
      if (attack->count("--t-range")) std::tie(ao.config.t_lo, ao.config.t_hi) = parse_range(t_range, "--t-range");
      if (attack->count("--widths-hint")) ao.config.widths_hint = parse_widths(widths_hint);
      return cmd_attack(ao);
    }
    so.instance = instance;
    so.out = out;
    so.sheets_out = sheets_out;
    so.seed = seed;
    if (!slice_dir.empty()) so.direction = parse_number_list(slice_dir, "--slice-dir");
    if (!slice_range.empty()) so.range = parse_range(slice_range, "--slice-range");
    return cmd_surface(so);
  });
}
