#include <benchmark/benchmark.h>

#include "gel/data.hpp"
#include "gel/federation.hpp"
#include "gel/models.hpp"
#include "gel/optimizers.hpp"

namespace {

const gel::FederatedDataset& desk() {
  static const gel::FederatedDataset ds = [] {
    gel::RngStream s = gel::seeded_stream(7, "data");
    return gel::generate_synthetic(gel::SyntheticConfig{}, s);
  }();
  return ds;
}

gel::ModelSpec model_for(gel::ModelKind kind) {
  return {kind, desk().feature_dim, desk().classes, 20};
}

void BM_AdamStep(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  gel::RngStream rng(1, "bench");
  const auto grad = gel::sample_normal(rng, 0.0, 1.0, n);
  gel::AdamState st = gel::AdamState::fresh(n);
  for (auto _ : state) {
    auto step = gel::adam_gradient_step(std::move(st), grad);
    st = std::move(step.state);
    benchmark::DoNotOptimize(step.delta_w.data());
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_AdamStep)->Arg(105)->Arg(1000)->Arg(100000);

void BM_LossGrad(benchmark::State& state) {
  const auto model = model_for(static_cast<gel::ModelKind>(state.range(0)));
  gel::RngStream rng(1, "bench");
  const auto params = model.initialize(rng);
  const auto batch = gel::sample_batch(desk().shards[0], static_cast<std::size_t>(state.range(1)), rng);
  for (auto _ : state) benchmark::DoNotOptimize(model.loss_grad(params, batch.view()).loss);
  state.SetLabel(gel::to_string(model.kind));
}
BENCHMARK(BM_LossGrad)->Args({0, 5})->Args({0, 64})->Args({1, 5})->Args({1, 64});

void BM_ClientUpdate(benchmark::State& state) {
  const auto model = model_for(gel::ModelKind::logistic_regression);
  gel::RngStream init(1, "init");
  const auto global = model.initialize(init);
  const gel::ClientPlan plan{0, static_cast<std::size_t>(state.range(0)), static_cast<std::size_t>(state.range(1)), 5};
  for (auto _ : state) {
    gel::RngStream s(1, "client");
    benchmark::DoNotOptimize(gel::client_update(global, desk().shards[0], plan, model, s).weights.values.data());
  }
}
BENCHMARK(BM_ClientUpdate)->Args({4, 0})->Args({4, 4})->Args({8, 0});

void BM_TrainingRound(benchmark::State& state) {
  gel::TrainingConfig cfg;
  cfg.model = model_for(gel::ModelKind::logistic_regression);
  cfg.budget = gel::BudgetModel::homogeneous(4);
  cfg.guesses = gel::GuessPolicy::fixed(4);
  cfg.max_rounds = 1;
  cfg.threads = static_cast<std::size_t>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(gel::run_training(desk(), cfg).rounds.size());
}
BENCHMARK(BM_TrainingRound)->Arg(1)->Arg(4);

}  // namespace

BENCHMARK_MAIN();
