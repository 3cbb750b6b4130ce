#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "gel/data.hpp"
#include "gel/federation.hpp"

namespace gel {

// 1-based index of the first round whose test accuracy is >= target, or
// nullopt if no round reaches it. No sustain requirement.
std::optional<std::size_t> rounds_to_target(std::span<const RoundRecord> records, double target);
std::optional<std::size_t> rounds_to_target(std::span<const double> accuracies, double target);

// Gradient computations saved by guessing relative to running u'+g' real
// steps: (cr_target * (u' + g') - cr_gel * u') * clients_per_round.
std::int64_t compute_savings(std::int64_t cr_target, std::int64_t cr_gel, std::int64_t u_prime,
                             std::int64_t g_prime, std::int64_t clients_per_round);

// cr_baseline / cr_gel; nullopt when either arm never reached the target.
std::optional<double> speedup(std::optional<std::size_t> cr_baseline, std::optional<std::size_t> cr_gel);
double speedup(std::size_t cr_baseline, std::size_t cr_gel);

// Linear-interpolation percentile (0..100) of a nonempty sample.
double percentile(std::vector<double> values, double pct);

struct CurvePoint {
  std::size_t round = 0;
  double accuracy = 0.0;
  double loss = 0.0;
  std::uint64_t grad_evals = 0;     // cumulative
  std::uint64_t guessed_steps = 0;  // cumulative
  std::uint64_t selection_digest = 0;
  std::uint64_t budget_digest = 0;

  friend bool operator==(const CurvePoint&, const CurvePoint&) = default;
};

std::vector<CurvePoint> to_curve(std::span<const RoundRecord> records);

// One arm of a paired comparison.
struct ArmSpec {
  std::string label;  // Baseline | GeL | Target, or any custom name
  BudgetModel budget;
  GuessPolicy guesses;

  friend bool operator==(const ArmSpec&, const ArmSpec&) = default;
};

// Baseline (u', g=0), GeL (u', g'), Target (u'+g', g=0).
std::vector<ArmSpec> standard_arms(std::size_t u_prime, std::size_t g_prime);
// Baseline and GeL sharing a heterogeneous budget range.
std::vector<ArmSpec> heterogeneous_arms(const BudgetModel& budget, const GuessPolicy& gel_guesses);

struct ExperimentResult {
  std::string arm;
  std::string budget;   // BudgetModel::describe()
  std::string guesses;  // GuessPolicy::describe()
  std::uint64_t seed = 0;
  std::optional<double> target_accuracy;
  std::optional<std::size_t> rounds_to_target;
  std::uint64_t total_gradient_evaluations = 0;
  std::uint64_t total_guessed_steps = 0;
  std::vector<CurvePoint> curve;

  friend bool operator==(const ExperimentResult&, const ExperimentResult&) = default;
};

std::string to_json(const ExperimentResult& result);
ExperimentResult experiment_result_from_json(const std::string& text);

// Per-round CSV: round,accuracy,loss,grad_evals,guessed_steps
std::string curve_csv(std::span<const CurvePoint> curve);
void write_text(const std::filesystem::path& path, const std::string& text);
std::string read_text(const std::filesystem::path& path);

// Runs one arm for one seed.
ExperimentResult run_arm(const FederatedDataset& dataset, const TrainingConfig& base, const ArmSpec& arm,
                         std::uint64_t seed);

struct PairedConfig {
  TrainingConfig base;  // model, K, B, Adam, max_rounds, target, threads
  std::vector<ArmSpec> arms;
  std::vector<std::uint64_t> seeds;
  std::size_t min_replicates = 5;
  std::size_t jobs = 1;  // concurrent (arm, seed) runs
};

// Every arm is run under every seed. Within a seed all arms share the init,
// selection, budget and batch streams, so arms differ only in budget and
// guess policy. Results are ordered seed-major, arm-minor.
std::vector<ExperimentResult> run_paired(const FederatedDataset& dataset, const PairedConfig& config);

struct ArmSummary {
  std::string arm;
  std::size_t runs = 0;
  std::size_t reached = 0;
  // Statistics over runs that reached the target.
  std::optional<double> mean_rounds;
  std::optional<std::size_t> min_rounds;
  std::optional<std::size_t> max_rounds;
  double mean_gradient_evaluations = 0.0;

  bool all_reached() const noexcept { return runs > 0 && reached == runs; }
};

// Groups results by arm label, in first-appearance order.
std::vector<ArmSummary> summarize(std::span<const ExperimentResult> results);

// Per-seed speedup of `gel_arm` over `baseline_arm`, averaged over the
// seeds where both reached the target. nullopt if there are none.
std::optional<double> mean_paired_speedup(std::span<const ExperimentResult> results,
                                          const std::string& baseline_arm, const std::string& gel_arm);

struct SweepCell {
  std::size_t u_prime = 0;
  double percentage = 0.0;
  std::size_t g_prime = 0;
  ArmSummary baseline;
  ArmSummary gel;
  ArmSummary target;
  std::vector<ExperimentResult> results;
};

struct SweepConfig {
  TrainingConfig base;
  std::vector<std::size_t> u_primes;
  std::vector<double> percentages{10, 25, 50, 75, 100, 125};
  std::vector<std::uint64_t> seeds;
  std::size_t jobs = 1;
};

// Baseline (u'), GeL (u', p% guesses) and Target (u' + round(p/100 u'))
// per grid cell. Identical (budget, guesses, seed) runs are shared between
// cells.
std::vector<SweepCell> run_sweep(const FederatedDataset& dataset, const SweepConfig& config);

// Runs `arm` for `horizon` rounds without a target under each seed and
// returns the given percentile of the final-round accuracies.
double calibrate_target(const FederatedDataset& dataset, const TrainingConfig& base, const ArmSpec& arm,
                        std::span<const std::uint64_t> seeds, std::size_t horizon, double pct);

}  // namespace gel
