#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "losscarto/io.hpp"
#include "support.hpp"

using namespace lc_test;

namespace {

struct Run {
  Instance inst;
  ReconstructionReport report;
};

Run attack_instance(const Instance& inst, AttackConfig cfg) {
  const NetworkShape shape = inst.shape();
  const auto oracle = make_loss_oracle(shape, inst.samples);
  Run r{inst, run_attack(*oracle, shape.weight_count(), shape.input_width(), cfg)};
  score_report(r.report, inst.inputs(), cfg.match_cos);
  return r;
}

std::set<std::size_t> matched_samples(const ReconstructionReport& r) {
  std::set<std::size_t> s;
  for (const auto& m : r.matches) s.insert(m.sample);
  return s;
}

}  // namespace

TEST(Attack, WarmupLineModel) {
  const NetworkShape shape({2, 1, 1});
  const auto oracle = make_line_oracle(shape, {{{1, 2}, {0}}, {{3, 1}, {0}}}, {0, 1, 1}, {-1, 0, 0});
  AttackConfig cfg;
  cfg.t_lo = 0.0;
  cfg.t_hi = 3.0;
  auto report = run_attack(*oracle, 1, 2, cfg);
  ASSERT_EQ(report.kink_locations.size(), 2u);
  EXPECT_NEAR(report.kink_locations[0], 1.0 / 3.0, 1e-6);
  EXPECT_NEAR(report.kink_locations[1], 2.0, 1e-6);
  EXPECT_LT(report.oracle_queries, 1000u);
  const std::vector<std::vector<double>> truth{{1, 2}, {3, 1}};
  score_report(report, truth, 0.999);
  EXPECT_EQ(matched_samples(report), (std::set<std::size_t>{0, 1}));
}

TEST(Attack, RecoversEveryInputOfSmallNet) {
  const Instance inst = generate_instance({3, 4, 2}, 5, 1);
  AttackConfig cfg;
  cfg.seed = 3;
  const auto blind = attack_instance(inst, cfg);
  EXPECT_EQ(matched_samples(blind.report).size(), 5u);
  EXPECT_LE(blind.report.oracle_queries, cfg.budget);
  for (const auto& m : blind.report.matches) EXPECT_GE(m.abs_cos, 0.999);

  cfg.widths_hint = inst.widths;
  const auto hinted = attack_instance(inst, cfg);
  EXPECT_EQ(matched_samples(hinted.report).size(), 5u);
  EXPECT_EQ(hinted.report.architecture_status, "not attempted");
  EXPECT_FALSE(hinted.report.architecture);
}

TEST(Attack, DirectionsComeFromSingleFirstLayerColumns) {
  const Instance inst = generate_instance({3, 4, 2}, 5, 2);
  const NetworkShape shape = inst.shape();
  AttackConfig cfg;
  cfg.seed = 5;
  const auto run = attack_instance(inst, cfg);
  ASSERT_FALSE(run.report.recovered_directions.empty());
  for (const auto& rd : run.report.recovered_directions) {
    ASSERT_EQ(rd.normal.size(), shape.weight_count());
    double top = 0.0;
    for (double x : rd.normal) top = std::max(top, std::abs(x));
    for (std::size_t v = 0; v < rd.normal.size(); ++v) {
      const auto c = shape.coord_of(v);
      if (c.layer != 1 || c.target != rd.target) {
        EXPECT_LT(std::abs(rd.normal[v]), cfg.support_tol * top);
      }
    }
    EXPECT_NEAR(std::sqrt(std::inner_product(rd.direction.begin(), rd.direction.end(), rd.direction.begin(), 0.0)), 1.0,
                1e-12);
  }
}

TEST(Attack, BudgetAndReproducibility) {
  const Instance inst = generate_instance({3, 4, 2}, 5, 4);
  AttackConfig cfg;
  cfg.seed = 11;
  cfg.budget = 5000;
  const auto a = attack_instance(inst, cfg);
  const auto b = attack_instance(inst, cfg);
  EXPECT_LE(a.report.oracle_queries, 5000u);
  EXPECT_TRUE(a.report.budget_exhausted);
  EXPECT_EQ(a.report.oracle_queries, b.report.oracle_queries);
  ASSERT_EQ(a.report.recovered_directions.size(), b.report.recovered_directions.size());
  for (std::size_t i = 0; i < a.report.recovered_directions.size(); ++i) {
    EXPECT_EQ(a.report.recovered_directions[i].direction, b.report.recovered_directions[i].direction);
  }
  EXPECT_EQ(a.report.kinks.size(), b.report.kinks.size());

  // Queries made before the attack do not count against its budget.
  const auto oracle = make_loss_oracle(inst.shape(), inst.samples);
  for (int i = 0; i < 50; ++i) (*oracle)(inst.weights);
  const auto report = run_attack(*oracle, oracle->dimension(), 3, cfg);
  EXPECT_EQ(report.oracle_queries, a.report.oracle_queries);
  EXPECT_EQ(oracle->query_count(), 50 + report.oracle_queries);
}

TEST(Attack, SmoothOracleYieldsNothing) {
  LossOracle lin(20, [](std::span<const double> w) {
    double s = 0.0;
    for (std::size_t i = 0; i < w.size(); ++i) s += static_cast<double>(i + 1) * w[i];
    return s;
  });
  AttackConfig cfg;
  cfg.max_lines = 50;
  const auto report = run_attack(lin, 20, 3, cfg);
  EXPECT_TRUE(report.recovered_directions.empty());
  EXPECT_TRUE(report.kinks.empty());
  EXPECT_EQ(report.lines_scanned, 50u);
  EXPECT_FALSE(report.budget_exhausted);
}

TEST(Attack, InvariantUnderInputScaling) {
  Instance inst = generate_instance({3, 4, 2}, 5, 6);
  AttackConfig cfg;
  cfg.seed = 2;
  const auto base = attack_instance(inst, cfg);
  for (auto& s : inst.samples) {
    for (auto& x : s.input) x *= 2.0;
  }
  const auto scaled = attack_instance(inst, cfg);
  EXPECT_EQ(matched_samples(base.report), matched_samples(scaled.report));
  for (const auto& m : scaled.report.matches) EXPECT_GE(m.abs_cos, 0.999);
}

TEST(Attack, RejectsBadArguments) {
  const auto oracle = make_loss_oracle(NetworkShape({2, 2, 1}), {{{1, 1}, {0}}});
  AttackConfig cfg;
  EXPECT_THROW(run_attack(*oracle, 5, 2, cfg), ShapeError);
  EXPECT_THROW(run_attack(*oracle, 6, 0, cfg), ValidationError);
  cfg.widths_hint = {3, 2, 1};
  EXPECT_THROW(run_attack(*oracle, 6, 2, cfg), ValidationError);
  cfg.widths_hint.clear();
  cfg.budget = 0;
  EXPECT_THROW(run_attack(*oracle, 6, 2, cfg), ValidationError);
}

TEST(Attack, RegionFitCrossCheckAgrees) {
  const Instance inst = generate_instance({2, 2, 1}, 2, 9);
  AttackConfig cfg;
  cfg.seed = 1;
  cfg.regionfit_path = true;
  cfg.widths_hint = inst.widths;
  const auto run = attack_instance(inst, cfg);
  ASSERT_FALSE(run.report.crosschecks.empty());
  std::size_t ok = 0;
  for (const auto& cc : run.report.crosschecks) {
    if (cc.status != "ok") continue;
    ++ok;
    EXPECT_GE(cc.abs_cos, 0.999);
  }
  EXPECT_GE(ok, 1u);
}

TEST(Score, MatchesAndScale) {
  ReconstructionReport r;
  for (const auto& d : std::vector<std::vector<double>>{{0.6, 0.8}, {1.0, 0.0}, {-0.8, 0.6}}) {
    RecoveredDirection rd;
    rd.direction = d;
    r.recovered_directions.push_back(rd);
  }
  const std::vector<std::vector<double>> truth{{3, 4}, {-2, 0.001}};
  score_report(r, truth, 0.999);
  ASSERT_EQ(r.matches.size(), 2u);
  EXPECT_EQ(r.matches[0].direction, 0u);
  EXPECT_EQ(r.matches[0].sample, 0u);
  EXPECT_NEAR(r.matches[0].scale, 5.0, 1e-12);
  EXPECT_EQ(r.matches[1].sample, 1u);
  EXPECT_NEAR(r.matches[1].scale, -2.0, 1e-12);
  const std::vector<std::vector<double>> wrong{{1, 2, 3}};
  EXPECT_THROW(score_report(r, wrong, 0.999), ShapeError);
}
