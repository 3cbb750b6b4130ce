#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "gel/data.hpp"
#include "gel/federation.hpp"
#include "gel/harness.hpp"

namespace gel {

struct DataSource {
  SyntheticConfig synthetic;
  std::uint64_t seed = 7;
  bool iid = false;
  std::optional<std::filesystem::path> path;  // exported dataset stem; overrides generation
};

// Sets the target accuracy from a reference arm when none is configured.
struct CalibrationConfig {
  std::string arm = "Target";
  double percentile = 80.0;
  std::size_t horizon = 300;
};

enum class PairedMode { homogeneous, heterogeneous };

struct PairedSettings {
  PairedMode mode = PairedMode::homogeneous;
  std::size_t u_prime = 4;
  std::size_t g_prime = 4;
  BudgetModel budget_range = BudgetModel::uniform(4, 13);
  GuessPolicy hetero_guesses = GuessPolicy::fixed(5);
};

// Everything a CLI run needs, loadable from one JSON file:
//
// {
//   "seed": 1,
//   "data": {"path": null, "clients": 100, "alpha": 1, "beta": 1, "feature_dim": 20,
//            "classes": 5, "min_samples": 10, "test_fraction": 0.2, "seed": 7, "iid": false},
//   "model": {"kind": "logreg", "hidden": 20},
//   "training": {"clients_per_round": 20, "batch_size": 5,
//                "budget": 4 | "budget_range": [a, b] | "budget_preset": "synthetic-low",
//                "guesses": 0 | "guess_pct": 25,
//                "target_accuracy": 0.6, "max_rounds": 500, "threads": 1,
//                "adam": {"alpha": 0.9, "beta": 0.999, "epsilon": 0.001, "delta": 1e-8}},
//   "paired": {"mode": "homogeneous", "u_prime": 4, "g_prime": 4,
//              "budget_range": [4, 13], "guesses": 5},
//   "seeds": [1, 2, 3, 4, 5],
//   "jobs": 1,
//   "sweep": {"u_primes": [4, 8, 13], "percentages": [10, 25, 50, 75, 100, 125]},
//   "calibration": {"arm": "Target", "percentile": 80, "horizon": 300}
// }
//
// Every key is optional.
struct ExperimentConfig {
  DataSource data;
  TrainingConfig training;
  PairedSettings paired;
  std::vector<std::uint64_t> seeds{1, 2, 3, 4, 5};
  std::size_t jobs = 1;
  std::vector<std::size_t> sweep_u_primes{4, 8, 13};
  std::vector<double> sweep_percentages{10, 25, 50, 75, 100, 125};
  std::optional<CalibrationConfig> calibration;
};

ExperimentConfig parse_experiment_config(const std::string& json_text);
ExperimentConfig load_experiment_config(const std::filesystem::path& path);
// Fully resolved config as JSON; parse_experiment_config accepts it back.
std::string to_json(const ExperimentConfig& config);

// Loads or generates the dataset and fills the model's input/class sizes.
FederatedDataset materialize_dataset(ExperimentConfig& config);

std::vector<ArmSpec> paired_arms(const PairedSettings& settings);

}  // namespace gel
