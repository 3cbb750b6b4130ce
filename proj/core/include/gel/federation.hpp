#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "gel/data.hpp"
#include "gel/models.hpp"
#include "gel/optimizers.hpp"

namespace gel {

// Work assigned to one client for one round.
struct ClientPlan {
  std::size_t client_id = 0;
  std::size_t budget = 1;   // real gradient steps, u_k
  std::size_t guesses = 0;  // guessed steps, g_k
  std::size_t batch_size = 5;
};

// How many guessed steps a client performs: either a fixed count or a
// percentage of its own budget, rounded to nearest (halves away from zero).
class GuessPolicy {
 public:
  enum class Kind { fixed_count, percentage };

  static GuessPolicy fixed(std::size_t count);
  static GuessPolicy percent(double pct);
  static GuessPolicy none() { return fixed(0); }

  Kind kind() const noexcept { return kind_; }
  double value() const noexcept { return value_; }
  std::string describe() const;

  // Number of guesses for a client with the given budget. A percentage is
  // resolved here, on the client, since the server need not know u_k.
  std::size_t resolve(std::size_t budget) const;

  friend bool operator==(const GuessPolicy&, const GuessPolicy&) = default;

 private:
  GuessPolicy(Kind kind, double value) : kind_(kind), value_(value) {}
  Kind kind_;
  double value_;
};

std::size_t assign_guesses(const GuessPolicy& policy, const ClientPlan& plan);

// Per-round client budgets: one value for everyone, or integers drawn
// uniformly from [low, high] for every selected client, fresh each round.
class BudgetModel {
 public:
  enum class Kind { homogeneous, heterogeneous_uniform };

  static BudgetModel homogeneous(std::size_t budget);
  static BudgetModel uniform(std::size_t low, std::size_t high);

  Kind kind() const noexcept { return kind_; }
  std::size_t low() const noexcept { return low_; }
  std::size_t high() const noexcept { return high_; }
  std::string describe() const;

  std::size_t sample(RngStream& stream) const;

  friend bool operator==(const BudgetModel&, const BudgetModel&) = default;

 private:
  BudgetModel(Kind kind, std::size_t low, std::size_t high) : kind_(kind), low_(low), high_(high) {}
  Kind kind_;
  std::size_t low_;
  std::size_t high_;
};

// Named budget ranges per benchmark. The full range of each dataset and
// its lower/upper halves.
struct BudgetPreset {
  std::string name;
  std::size_t low;
  std::size_t high;
};
const std::vector<BudgetPreset>& budget_presets();
BudgetModel budget_preset(std::string_view name);

struct RoundRecord {
  std::size_t round = 0;  // 1-based
  std::vector<std::size_t> selected;  // in selection order
  std::vector<std::size_t> budgets;   // aligned with `selected`
  double test_accuracy = 0.0;
  double train_loss = 0.0;
  std::uint64_t round_gradient_evaluations = 0;
  std::uint64_t cumulative_gradient_evaluations = 0;
  std::uint64_t cumulative_guessed_steps = 0;
  double wall_seconds = 0.0;
};

// K distinct ids drawn uniformly without replacement from [0, pool_size),
// returned in draw order. K > pool_size is a ConfigError.
std::vector<std::size_t> select_clients(std::size_t pool_size, std::size_t k, RngStream& stream);

// Observation of a single local update, for instrumentation and tests.
struct StepEvent {
  std::size_t round = 0;  // 0 when client_update is called directly
  std::size_t client_id = 0;
  std::size_t step = 0;   // 1-based Adam step index
  bool guessed = false;
  const Vector& grad;
  const Vector& delta_w;
};
using StepObserver = std::function<void(const StepEvent&)>;

struct ClientUpdateResult {
  ParameterVector weights;
  std::uint64_t gradient_evaluations = 0;
  std::uint64_t guessed_steps = 0;
};

// Local training on one client. A fresh Adam state is created, `budget`
// mini-batch gradient steps are taken, then `guesses` further steps reuse
// the last computed gradient. The optimizer state is discarded on return.
ClientUpdateResult client_update(const ParameterVector& global, const ClientShard& shard,
                                 const ClientPlan& plan, const ModelSpec& model, RngStream& stream,
                                 const AdamConfig& adam = {}, const StepObserver& observer = {},
                                 std::size_t round = 0);

// Elementwise mean of client models, summed in the order given.
ParameterVector aggregate(std::span<const ParameterVector> models);

struct TrainingConfig {
  ModelSpec model;
  std::size_t clients_per_round = 20;
  std::size_t batch_size = 5;
  BudgetModel budget = BudgetModel::homogeneous(4);
  GuessPolicy guesses = GuessPolicy::none();
  AdamConfig adam;
  std::optional<double> target_accuracy;  // stop at first round reaching it
  std::size_t max_rounds = 100;
  std::uint64_t seed = 1;
  std::size_t threads = 1;  // concurrent client updates within a round
};

struct TrainingResult {
  std::vector<RoundRecord> rounds;
  ParameterVector initial_model;
  ParameterVector final_model;
  bool target_reached = false;
};

// Runs the server loop. Every round derives the streams "select/<t>",
// "budget/<t>" and "client/<t>/<id>" from the master seed, and the initial
// model comes from "init", so two configs differing only in budget or guess
// policy see identical selections and batches. Client models are averaged
// in ascending client-id order, which makes results independent of
// `threads`.
TrainingResult run_training(const FederatedDataset& dataset, const TrainingConfig& config,
                            const StepObserver& observer = {});

// Checkpoint: <stem>.json holding round index, parameter shape and values.
void save_checkpoint(const ParameterVector& model, std::size_t round, const std::filesystem::path& stem);
std::pair<ParameterVector, std::size_t> load_checkpoint(const std::filesystem::path& stem);

}  // namespace gel
