#include "gel/federation.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <exception>
#include <fstream>
#include <mutex>
#include <numeric>
#include <thread>

#include <nlohmann/json.hpp>

#include "gel/errors.hpp"

namespace gel {

GuessPolicy GuessPolicy::fixed(std::size_t count) {
  return GuessPolicy(Kind::fixed_count, static_cast<double>(count));
}

GuessPolicy GuessPolicy::percent(double pct) {
  if (!(pct >= 0.0)) throw ConfigError("guess percentage must be non-negative");
  return GuessPolicy(Kind::percentage, pct);
}

std::string GuessPolicy::describe() const {
  if (kind_ == Kind::fixed_count) return "g=" + std::to_string(static_cast<std::size_t>(value_));
  char buf[32];
  std::snprintf(buf, sizeof(buf), "g=%g%%", value_);
  return buf;
}

std::size_t GuessPolicy::resolve(std::size_t budget) const {
  if (kind_ == Kind::fixed_count) return static_cast<std::size_t>(value_);
  return static_cast<std::size_t>(std::llround(value_ / 100.0 * static_cast<double>(budget)));
}

std::size_t assign_guesses(const GuessPolicy& policy, const ClientPlan& plan) {
  return policy.resolve(plan.budget);
}

BudgetModel BudgetModel::homogeneous(std::size_t budget) {
  if (budget < 1) throw ConfigError("budget must be at least 1");
  return BudgetModel(Kind::homogeneous, budget, budget);
}

BudgetModel BudgetModel::uniform(std::size_t low, std::size_t high) {
  if (low < 1 || low > high) throw ConfigError("budget range must satisfy 1 <= a <= b");
  return BudgetModel(Kind::heterogeneous_uniform, low, high);
}

std::string BudgetModel::describe() const {
  if (kind_ == Kind::homogeneous) return "u=" + std::to_string(low_);
  return "u~U[" + std::to_string(low_) + "," + std::to_string(high_) + "]";
}

std::size_t BudgetModel::sample(RngStream& stream) const {
  if (kind_ == Kind::homogeneous) return low_;
  return static_cast<std::size_t>(stream.uniform_int(low_, high_));
}

const std::vector<BudgetPreset>& budget_presets() {
  static const std::vector<BudgetPreset> presets = {
      {"shakespeare", 10, 50}, {"shakespeare-low", 10, 30}, {"shakespeare-high", 30, 50},
      {"sent140", 3, 17},      {"sent140-low", 3, 10},      {"sent140-high", 10, 17},
      {"femnist", 8, 40},      {"femnist-low", 8, 24},      {"femnist-high", 24, 40},
      {"celeba", 4, 19},       {"celeba-low", 4, 11},       {"celeba-high", 11, 19},
      {"synthetic", 4, 22},    {"synthetic-low", 4, 13},    {"synthetic-high", 13, 22},
  };
  return presets;
}

BudgetModel budget_preset(std::string_view name) {
  for (const auto& p : budget_presets()) {
    if (p.name == name) return BudgetModel::uniform(p.low, p.high);
  }
  throw ConfigError("unknown budget preset '" + std::string(name) + "'");
}

std::vector<std::size_t> select_clients(std::size_t pool_size, std::size_t k, RngStream& stream) {
  if (k > pool_size) {
    throw ConfigError("cannot select " + std::to_string(k) + " clients from a pool of " +
                      std::to_string(pool_size));
  }
  std::vector<std::size_t> ids(pool_size);
  std::iota(ids.begin(), ids.end(), 0);
  // Partial Fisher-Yates: the first k slots end up a uniform k-subset.
  for (std::size_t i = 0; i < k; ++i) {
    const auto j = static_cast<std::size_t>(stream.uniform_int(i, pool_size - 1));
    std::swap(ids[i], ids[j]);
  }
  ids.resize(k);
  return ids;
}

ClientUpdateResult client_update(const ParameterVector& global, const ClientShard& shard,
                                 const ClientPlan& plan, const ModelSpec& model, RngStream& stream,
                                 const AdamConfig& adam, const StepObserver& observer,
                                 std::size_t round) {
  if (plan.budget == 0) {
    if (plan.guesses > 0) throw ProtocolError("client_update: guessing requires at least one real step");
    throw ProtocolError("client_update: budget must be at least 1");
  }
  if (shard.train.empty()) {
    throw EvaluationError("client_update: client " + std::to_string(shard.client_id) +
                          " has no training samples");
  }

  ClientUpdateResult out{global, 0, 0};
  Vector& w = out.weights.values;
  AdamState state = AdamState::fresh(w.size(), adam);
  Vector last_grad;

  auto apply = [&](const Vector& grad, bool guessed) {
    auto [delta_w, next] = adam_gradient_step(std::move(state), grad);
    state = std::move(next);
    axpy_inplace(1.0, delta_w, w);
    if (observer) observer(StepEvent{round, plan.client_id, state.t, guessed, grad, delta_w});
  };

  for (std::size_t i = 0; i < plan.budget; ++i) {
    const Batch batch = sample_batch(shard, plan.batch_size, stream);
    LossGrad lg = model.loss_grad(out.weights, batch.view());
    ++out.gradient_evaluations;
    last_grad = std::move(lg.grad.values);
    apply(last_grad, false);
  }
  for (std::size_t j = 0; j < plan.guesses; ++j) {
    apply(last_grad, true);
    ++out.guessed_steps;
  }
  debug_check_finite(w, "client_update");
  return out;
}

ParameterVector aggregate(std::span<const ParameterVector> models) {
  if (models.empty()) throw ConfigError("aggregate: no client models");
  ParameterVector sum(Vector(models.front().size()), models.front().shape);
  for (const auto& m : models) {
    require_same_shape(sum, m, "aggregate");
    axpy_inplace(1.0, m.values, sum.values);
  }
  const double inv = 1.0 / static_cast<double>(models.size());
  for (double& x : sum.values) x *= inv;
  return sum;
}

namespace {

std::string round_label(std::string_view prefix, std::size_t round) {
  return std::string(prefix) + "/" + std::to_string(round);
}

void validate_training_config(const FederatedDataset& dataset, const TrainingConfig& config) {
  if (dataset.shards.empty()) throw ConfigError("training needs a nonempty dataset");
  if (config.clients_per_round < 1) throw ConfigError("clients_per_round must be at least 1");
  if (config.clients_per_round > dataset.num_clients()) {
    throw ConfigError("clients_per_round (" + std::to_string(config.clients_per_round) +
                      ") exceeds the client pool (" + std::to_string(dataset.num_clients()) + ")");
  }
  if (config.batch_size < 1) throw ConfigError("batch_size must be at least 1");
  if (config.model.features != dataset.feature_dim || config.model.classes != dataset.classes) {
    throw ConfigError("model dimensions do not match the dataset");
  }
  if (config.target_accuracy && !(*config.target_accuracy > 0.0 && *config.target_accuracy <= 1.0)) {
    throw ConfigError("target accuracy must lie in (0, 1]");
  }
  if (config.threads < 1) throw ConfigError("threads must be at least 1");
}

}  // namespace

TrainingResult run_training(const FederatedDataset& dataset, const TrainingConfig& config,
                            const StepObserver& observer) {
  validate_training_config(dataset, config);

  TrainingResult result;
  {
    RngStream init = seeded_stream(config.seed, "init");
    result.initial_model = config.model.initialize(init);
  }
  ParameterVector global = result.initial_model;

  std::uint64_t cumulative_grads = 0;
  std::uint64_t cumulative_guesses = 0;
  std::mutex observer_mutex;
  StepObserver guarded_observer;
  if (observer) {
    guarded_observer = [&](const StepEvent& e) {
      std::lock_guard lock(observer_mutex);
      observer(e);
    };
  }

  for (std::size_t t = 1; t <= config.max_rounds; ++t) {
    const auto started = std::chrono::steady_clock::now();

    RngStream select_stream = seeded_stream(config.seed, round_label("select", t));
    RngStream budget_stream = seeded_stream(config.seed, round_label("budget", t));
    const auto selected = select_clients(dataset.num_clients(), config.clients_per_round, select_stream);

    std::vector<ClientPlan> plans;
    plans.reserve(selected.size());
    for (std::size_t id : selected) {
      ClientPlan plan{id, config.budget.sample(budget_stream), 0, config.batch_size};
      plan.guesses = assign_guesses(config.guesses, plan);
      plans.push_back(plan);
    }

    std::vector<ClientUpdateResult> updates(plans.size());
    auto run_one = [&](std::size_t i) {
      const ClientPlan& plan = plans[i];
      RngStream stream = seeded_stream(config.seed, "client/" + std::to_string(t) + "/" +
                                                        std::to_string(plan.client_id));
      updates[i] = client_update(global, dataset.shards[plan.client_id], plan, config.model, stream,
                                 config.adam, guarded_observer, t);
    };

    const std::size_t workers = std::min(config.threads, plans.size());
    if (workers <= 1) {
      for (std::size_t i = 0; i < plans.size(); ++i) run_one(i);
    } else {
      std::atomic<std::size_t> next{0};
      std::exception_ptr failure;
      std::mutex failure_mutex;
      {
        std::vector<std::jthread> pool;
        pool.reserve(workers);
        for (std::size_t w = 0; w < workers; ++w) {
          pool.emplace_back([&] {
            for (std::size_t i = next.fetch_add(1); i < plans.size(); i = next.fetch_add(1)) {
              try {
                run_one(i);
              } catch (...) {
                std::lock_guard lock(failure_mutex);
                if (!failure) failure = std::current_exception();
              }
            }
          });
        }
      }
      if (failure) std::rethrow_exception(failure);
    }

    // Fixed summation order: ascending client id.
    std::vector<std::size_t> order(plans.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return plans[a].client_id < plans[b].client_id; });
    std::vector<ParameterVector> models;
    models.reserve(order.size());
    RoundRecord record;
    record.round = t;
    record.selected = selected;
    for (const auto& plan : plans) record.budgets.push_back(plan.budget);
    for (std::size_t i : order) {
      record.round_gradient_evaluations += updates[i].gradient_evaluations;
      cumulative_guesses += updates[i].guessed_steps;
      models.push_back(std::move(updates[i].weights));
    }
    global = aggregate(models);
    cumulative_grads += record.round_gradient_evaluations;

    record.test_accuracy = accuracy(config.model, global, dataset.shards, Split::test);
    record.train_loss = pooled_loss(config.model, global, dataset.shards, Split::train);
    record.cumulative_gradient_evaluations = cumulative_grads;
    record.cumulative_guessed_steps = cumulative_guesses;
    record.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    result.rounds.push_back(std::move(record));

    if (config.target_accuracy && result.rounds.back().test_accuracy >= *config.target_accuracy) {
      result.target_reached = true;
      break;
    }
  }
  result.final_model = std::move(global);
  return result;
}

void save_checkpoint(const ParameterVector& model, std::size_t round, const std::filesystem::path& stem) {
  auto path = stem;
  path += ".json";
  if (stem.has_parent_path()) std::filesystem::create_directories(stem.parent_path());
  nlohmann::json js;
  js["format"] = "gel-checkpoint-v1";
  js["round"] = round;
  auto& shape = js["shape"] = nlohmann::json::array();
  for (const auto& layer : model.shape) {
    shape.push_back({{"name", layer.name}, {"rows", layer.rows}, {"cols", layer.cols}});
  }
  js["values"] = model.values.values();
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << js.dump() << '\n';
}

std::pair<ParameterVector, std::size_t> load_checkpoint(const std::filesystem::path& stem) {
  auto path = stem;
  path += ".json";
  std::ifstream in(path);
  if (!in) throw IoError("cannot read " + path.string());
  try {
    nlohmann::json js;
    in >> js;
    ParameterShape shape;
    for (const auto& layer : js.at("shape")) {
      shape.push_back({layer.at("name").get<std::string>(), layer.at("rows").get<std::size_t>(),
                       layer.at("cols").get<std::size_t>()});
    }
    Vector values(js.at("values").get<std::vector<double>>());
    return {ParameterVector(std::move(values), std::move(shape)), js.at("round").get<std::size_t>()};
  } catch (const nlohmann::json::exception& e) {
    throw IoError(path.string() + ": " + e.what());
  }
}

}  // namespace gel
