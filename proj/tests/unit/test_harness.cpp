#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>

#include "gel/errors.hpp"
#include "gel/harness.hpp"

namespace fs = std::filesystem;

namespace {

const gel::FederatedDataset& small() {
  static const gel::FederatedDataset ds = [] {
    gel::SyntheticConfig cfg;
    cfg.num_clients = 25;
    gel::RngStream s = gel::seeded_stream(7, "data");
    return gel::generate_synthetic(cfg, s);
  }();
  return ds;
}

gel::TrainingConfig base_config() {
  gel::TrainingConfig cfg;
  cfg.model = {gel::ModelKind::logistic_regression, small().feature_dim, small().classes};
  cfg.clients_per_round = 5;
  cfg.max_rounds = 12;
  return cfg;
}

TEST(RoundsToTarget, FirstCrossing) {
  const std::vector<double> acc{0.1, 0.3, 0.25, 0.5, 0.2};
  EXPECT_EQ(gel::rounds_to_target(acc, 0.3), 2u);
  EXPECT_EQ(gel::rounds_to_target(acc, 0.45), 4u);
  EXPECT_EQ(gel::rounds_to_target(acc, 0.05), 1u);
  EXPECT_FALSE(gel::rounds_to_target(acc, 0.6).has_value());
  EXPECT_FALSE(gel::rounds_to_target(std::vector<double>{}, 0.1).has_value());
}

TEST(Savings, ReferenceRows) {
  EXPECT_EQ(gel::compute_savings(633, 668, 20, 5, 20), 49300);
  EXPECT_EQ(gel::compute_savings(193, 193, 3, 2, 20), 7720);
  EXPECT_EQ(gel::compute_savings(151, 151, 6, 3, 20), 9060);
  EXPECT_EQ(gel::compute_savings(136, 151, 4, 2, 20), 4240);
  EXPECT_EQ(gel::compute_savings(2452, 2614, 4, 4, 20), 183200);
}

TEST(Savings, EdgeCases) {
  EXPECT_EQ(gel::compute_savings(100, 100, 7, 0, 20), 0);
  EXPECT_LT(gel::compute_savings(10, 100, 4, 1, 20), 0);
  EXPECT_THROW(gel::compute_savings(-1, 1, 1, 1, 1), gel::DomainError);
}

TEST(Speedup, Values) {
  EXPECT_NEAR(gel::speedup(std::size_t{2336}, std::size_t{1423}), 1.64, 0.005);
  EXPECT_NEAR(gel::speedup(std::size_t{95}, std::size_t{103}), 0.92, 0.005);
  EXPECT_EQ(gel::speedup(std::size_t{7}, std::size_t{7}), 1.0);
  EXPECT_THROW(gel::speedup(std::size_t{7}, std::size_t{0}), gel::DomainError);
  EXPECT_FALSE(gel::speedup(std::optional<std::size_t>{}, std::optional<std::size_t>{3}).has_value());
  EXPECT_FALSE(gel::speedup(std::optional<std::size_t>{3}, std::optional<std::size_t>{}).has_value());
}

TEST(Percentile, LinearInterpolation) {
  EXPECT_DOUBLE_EQ(gel::percentile({5.0}, 80), 5.0);
  EXPECT_DOUBLE_EQ(gel::percentile({1, 2, 3, 4, 5}, 80), 4.2);
  EXPECT_DOUBLE_EQ(gel::percentile({3, 1, 2}, 50), 2.0);
  EXPECT_DOUBLE_EQ(gel::percentile({1, 2}, 0), 1.0);
  EXPECT_DOUBLE_EQ(gel::percentile({1, 2}, 100), 2.0);
  EXPECT_THROW(gel::percentile({}, 50), gel::DomainError);
  EXPECT_THROW(gel::percentile({1.0}, 101), gel::DomainError);
}

TEST(Arms, StandardAndHeterogeneous) {
  const auto arms = gel::standard_arms(4, 4);
  ASSERT_EQ(arms.size(), 3u);
  EXPECT_EQ(arms[0], (gel::ArmSpec{"Baseline", gel::BudgetModel::homogeneous(4), gel::GuessPolicy::none()}));
  EXPECT_EQ(arms[1], (gel::ArmSpec{"GeL", gel::BudgetModel::homogeneous(4), gel::GuessPolicy::fixed(4)}));
  EXPECT_EQ(arms[2], (gel::ArmSpec{"Target", gel::BudgetModel::homogeneous(8), gel::GuessPolicy::none()}));
  const auto het = gel::heterogeneous_arms(gel::BudgetModel::uniform(4, 13), gel::GuessPolicy::fixed(5));
  ASSERT_EQ(het.size(), 2u);
  EXPECT_EQ(het[0].guesses, gel::GuessPolicy::none());
  EXPECT_EQ(het[1].budget, gel::BudgetModel::uniform(4, 13));
}

TEST(Results, JsonRoundTrip) {
  auto cfg = base_config();
  cfg.target_accuracy = 0.3;
  const auto r = gel::run_arm(small(), cfg, gel::standard_arms(3, 2)[1], 4);
  EXPECT_EQ(gel::experiment_result_from_json(gel::to_json(r)), r);
  gel::ExperimentResult empty;
  empty.arm = "x";
  EXPECT_EQ(gel::experiment_result_from_json(gel::to_json(empty)), empty);
  EXPECT_THROW(gel::experiment_result_from_json("{not json"), gel::IoError);
}

TEST(Results, CurveCsv) {
  std::vector<gel::CurvePoint> curve{{1, 0.25, 1.5, 20, 0, 0, 0}, {2, 0.5, 1.25, 40, 10, 0, 0}};
  EXPECT_EQ(gel::curve_csv(curve), "round,accuracy,loss,grad_evals,guessed_steps\n1,0.25,1.5,20,0\n2,0.5,1.25,40,10\n");
}

TEST(Results, TextIo) {
  const auto p = fs::temp_directory_path() / "gel_harness_io" / "nested" / "f.txt";
  gel::write_text(p, "hello\n");
  EXPECT_EQ(gel::read_text(p), "hello\n");
  fs::remove_all(fs::temp_directory_path() / "gel_harness_io");
  EXPECT_THROW(gel::read_text(p), gel::IoError);
}

TEST(RunArm, FieldsFilled) {
  auto cfg = base_config();
  const auto r = gel::run_arm(small(), cfg, gel::standard_arms(3, 2)[1], 9);
  EXPECT_EQ(r.arm, "GeL");
  EXPECT_EQ(r.budget, "u=3");
  EXPECT_EQ(r.guesses, "g=2");
  EXPECT_EQ(r.seed, 9u);
  EXPECT_EQ(r.curve.size(), 12u);
  EXPECT_EQ(r.total_gradient_evaluations, 12u * 5 * 3);
  EXPECT_EQ(r.total_guessed_steps, 12u * 5 * 2);
  EXPECT_FALSE(r.rounds_to_target.has_value());
}

TEST(Paired, StreamsSharedAcrossArms) {
  gel::PairedConfig pc;
  pc.base = base_config();
  pc.arms = gel::heterogeneous_arms(gel::BudgetModel::uniform(2, 7), gel::GuessPolicy::fixed(3));
  pc.seeds = {1, 2, 3, 4, 5};
  const auto results = gel::run_paired(small(), pc);
  ASSERT_EQ(results.size(), 10u);
  for (std::size_t s = 0; s < 5; ++s) {
    const auto& b = results[2 * s];
    const auto& g = results[2 * s + 1];
    EXPECT_EQ(b.arm, "Baseline");
    EXPECT_EQ(g.arm, "GeL");
    EXPECT_EQ(b.seed, g.seed);
    for (std::size_t t = 0; t < b.curve.size(); ++t) {
      EXPECT_EQ(b.curve[t].selection_digest, g.curve[t].selection_digest);
      EXPECT_EQ(b.curve[t].budget_digest, g.curve[t].budget_digest);
    }
  }
  EXPECT_NE(results[0].curve[0].selection_digest, results[2].curve[0].selection_digest);
}

TEST(Paired, ReproducibleAndJobInvariant) {
  gel::PairedConfig pc;
  pc.base = base_config();
  pc.arms = gel::standard_arms(2, 2);
  pc.seeds = {1, 2, 3, 4, 5};
  const auto a = gel::run_paired(small(), pc);
  pc.jobs = 4;
  EXPECT_EQ(gel::run_paired(small(), pc), a);
}

TEST(Paired, ConfigErrors) {
  gel::PairedConfig pc;
  pc.base = base_config();
  pc.arms = gel::standard_arms(2, 2);
  pc.seeds = {1, 2, 3, 4};
  EXPECT_THROW(gel::run_paired(small(), pc), gel::ConfigError);
  pc.seeds = {1, 2, 3, 4, 5};
  pc.arms.push_back(pc.arms[0]);
  EXPECT_THROW(gel::run_paired(small(), pc), gel::ConfigError);
  pc.arms.clear();
  EXPECT_THROW(gel::run_paired(small(), pc), gel::ConfigError);
}

gel::ExperimentResult fake(std::string arm, std::uint64_t seed, std::optional<std::size_t> cr, std::uint64_t grads) {
  gel::ExperimentResult r;
  r.arm = std::move(arm);
  r.seed = seed;
  r.rounds_to_target = cr;
  r.total_gradient_evaluations = grads;
  return r;
}

TEST(Summaries, MeansOverReachedRuns) {
  const std::vector<gel::ExperimentResult> rs{fake("Baseline", 1, 10, 100), fake("GeL", 1, 5, 50),
                                              fake("Baseline", 2, 20, 200), fake("GeL", 2, {}, 80),
                                              fake("Baseline", 3, 30, 300), fake("GeL", 3, 10, 100)};
  const auto s = gel::summarize(rs);
  ASSERT_EQ(s.size(), 2u);
  EXPECT_EQ(s[0].arm, "Baseline");
  EXPECT_EQ(s[0].runs, 3u);
  EXPECT_TRUE(s[0].all_reached());
  EXPECT_DOUBLE_EQ(*s[0].mean_rounds, 20.0);
  EXPECT_EQ(*s[0].min_rounds, 10u);
  EXPECT_EQ(*s[0].max_rounds, 30u);
  EXPECT_DOUBLE_EQ(s[0].mean_gradient_evaluations, 200.0);
  EXPECT_FALSE(s[1].all_reached());
  EXPECT_EQ(s[1].reached, 2u);
  EXPECT_DOUBLE_EQ(*s[1].mean_rounds, 7.5);
  // Seeds 1 and 3 only: (2 + 3) / 2.
  EXPECT_DOUBLE_EQ(*gel::mean_paired_speedup(rs, "Baseline", "GeL"), 2.5);
  EXPECT_FALSE(gel::mean_paired_speedup(rs, "Baseline", "Target").has_value());
}

TEST(Sweep, GridAndSharing) {
  gel::SweepConfig sc;
  sc.base = base_config();
  sc.base.target_accuracy = 0.3;
  sc.base.max_rounds = 8;
  sc.u_primes = {2, 4};
  sc.percentages = {25, 50, 100};
  sc.seeds = {1, 2};
  const auto cells = gel::run_sweep(small(), sc);
  ASSERT_EQ(cells.size(), 6u);
  EXPECT_EQ(cells[0].g_prime, 1u);  // 25% of 2 = 0.5 rounds up
  EXPECT_EQ(cells[5].g_prime, 4u);
  for (const auto& c : cells) {
    EXPECT_EQ(c.results.size(), 6u);
    EXPECT_EQ(c.baseline.runs, 2u);
  }
  // Target arm of (u'=2, 100%) is the u=4 baseline.
  const auto& shared_a = cells[2].results[2];
  const auto& shared_b = cells[3].results[0];
  EXPECT_EQ(shared_a.curve, shared_b.curve);
  sc.u_primes.clear();
  EXPECT_THROW(gel::run_sweep(small(), sc), gel::ConfigError);
}

TEST(Calibration, PercentileOfFinalAccuracy) {
  auto cfg = base_config();
  const auto arm = gel::standard_arms(2, 2)[2];
  const std::vector<std::uint64_t> seeds{1, 2, 3};
  std::vector<double> finals;
  for (auto s : seeds) {
    auto c = cfg;
    c.max_rounds = 6;
    finals.push_back(gel::run_arm(small(), c, arm, s).curve.back().accuracy);
  }
  EXPECT_DOUBLE_EQ(gel::calibrate_target(small(), cfg, arm, seeds, 6, 80), gel::percentile(finals, 80));
  EXPECT_THROW(gel::calibrate_target(small(), cfg, arm, {}, 6, 80), gel::ConfigError);
}

}  // namespace
