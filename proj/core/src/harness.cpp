#include "gel/harness.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <exception>
#include <fstream>
#include <map>
#include <mutex>
#include <sstream>
#include <thread>
#include <tuple>

#include <nlohmann/json.hpp>

#include "gel/errors.hpp"

namespace gel {
namespace {

std::uint64_t digest(std::span<const std::size_t> values) {
  std::uint64_t h = 0xCBF29CE484222325ULL;
  for (std::size_t v : values) {
    for (int byte = 0; byte < 8; ++byte) {
      h ^= (static_cast<std::uint64_t>(v) >> (8 * byte)) & 0xFF;
      h *= 0x100000001B3ULL;
    }
  }
  return h;
}

void append_double(std::string& out, double value) {
  char buf[32];
  const auto result = std::to_chars(buf, buf + sizeof(buf), value);
  out.append(buf, result.ptr);
}

// Runs task(i) for i in [0, n) on up to `jobs` threads; rethrows the first failure.
template <typename Task>
void parallel_for(std::size_t n, std::size_t jobs, Task task) {
  jobs = std::max<std::size_t>(1, std::min(jobs, n));
  if (jobs == 1) {
    for (std::size_t i = 0; i < n; ++i) task(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  {
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < jobs; ++w) {
      pool.emplace_back([&] {
        for (std::size_t i = next.fetch_add(1); i < n; i = next.fetch_add(1)) {
          try {
            task(i);
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

}  // namespace

std::optional<std::size_t> rounds_to_target(std::span<const double> accuracies, double target) {
  for (std::size_t i = 0; i < accuracies.size(); ++i) {
    if (accuracies[i] >= target) return i + 1;
  }
  return std::nullopt;
}

std::optional<std::size_t> rounds_to_target(std::span<const RoundRecord> records, double target) {
  for (const auto& r : records) {
    if (r.test_accuracy >= target) return r.round;
  }
  return std::nullopt;
}

std::int64_t compute_savings(std::int64_t cr_target, std::int64_t cr_gel, std::int64_t u_prime,
                             std::int64_t g_prime, std::int64_t clients_per_round) {
  if (cr_target < 0 || cr_gel < 0 || u_prime < 0 || g_prime < 0 || clients_per_round < 0) {
    throw DomainError("compute_savings: counts must be non-negative");
  }
  return (cr_target * (u_prime + g_prime) - cr_gel * u_prime) * clients_per_round;
}

double speedup(std::size_t cr_baseline, std::size_t cr_gel) {
  if (cr_gel == 0) throw DomainError("speedup: GeL rounds must be positive");
  return static_cast<double>(cr_baseline) / static_cast<double>(cr_gel);
}

std::optional<double> speedup(std::optional<std::size_t> cr_baseline, std::optional<std::size_t> cr_gel) {
  if (!cr_baseline || !cr_gel) return std::nullopt;
  return speedup(*cr_baseline, *cr_gel);
}

double percentile(std::vector<double> values, double pct) {
  if (values.empty()) throw DomainError("percentile of an empty sample");
  if (pct < 0.0 || pct > 100.0) throw DomainError("percentile must lie in [0, 100]");
  std::sort(values.begin(), values.end());
  const double pos = pct / 100.0 * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, values.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return values[lo] + frac * (values[hi] - values[lo]);
}

std::vector<CurvePoint> to_curve(std::span<const RoundRecord> records) {
  std::vector<CurvePoint> curve;
  curve.reserve(records.size());
  for (const auto& r : records) {
    curve.push_back({r.round, r.test_accuracy, r.train_loss, r.cumulative_gradient_evaluations,
                     r.cumulative_guessed_steps, digest(r.selected), digest(r.budgets)});
  }
  return curve;
}

std::vector<ArmSpec> standard_arms(std::size_t u_prime, std::size_t g_prime) {
  return {
      {"Baseline", BudgetModel::homogeneous(u_prime), GuessPolicy::none()},
      {"GeL", BudgetModel::homogeneous(u_prime), GuessPolicy::fixed(g_prime)},
      {"Target", BudgetModel::homogeneous(u_prime + g_prime), GuessPolicy::none()},
  };
}

std::vector<ArmSpec> heterogeneous_arms(const BudgetModel& budget, const GuessPolicy& gel_guesses) {
  return {
      {"Baseline", budget, GuessPolicy::none()},
      {"GeL", budget, gel_guesses},
  };
}

std::string to_json(const ExperimentResult& r) {
  nlohmann::json js;
  js["arm"] = r.arm;
  js["budget"] = r.budget;
  js["guesses"] = r.guesses;
  js["seed"] = r.seed;
  js["target_accuracy"] = r.target_accuracy ? nlohmann::json(*r.target_accuracy) : nlohmann::json();
  js["rounds_to_target"] = r.rounds_to_target ? nlohmann::json(*r.rounds_to_target) : nlohmann::json();
  js["total_gradient_evaluations"] = r.total_gradient_evaluations;
  js["total_guessed_steps"] = r.total_guessed_steps;
  auto& curve = js["curve"] = nlohmann::json::array();
  for (const auto& p : r.curve) {
    curve.push_back({{"round", p.round},
                     {"accuracy", p.accuracy},
                     {"loss", p.loss},
                     {"grad_evals", p.grad_evals},
                     {"guessed_steps", p.guessed_steps},
                     {"selection_digest", p.selection_digest},
                     {"budget_digest", p.budget_digest}});
  }
  return js.dump(2);
}

ExperimentResult experiment_result_from_json(const std::string& text) {
  try {
    const auto js = nlohmann::json::parse(text);
    ExperimentResult r;
    r.arm = js.at("arm").get<std::string>();
    r.budget = js.at("budget").get<std::string>();
    r.guesses = js.at("guesses").get<std::string>();
    r.seed = js.at("seed").get<std::uint64_t>();
    if (!js.at("target_accuracy").is_null()) r.target_accuracy = js["target_accuracy"].get<double>();
    if (!js.at("rounds_to_target").is_null()) r.rounds_to_target = js["rounds_to_target"].get<std::size_t>();
    r.total_gradient_evaluations = js.at("total_gradient_evaluations").get<std::uint64_t>();
    r.total_guessed_steps = js.at("total_guessed_steps").get<std::uint64_t>();
    for (const auto& p : js.at("curve")) {
      r.curve.push_back({p.at("round").get<std::size_t>(), p.at("accuracy").get<double>(),
                         p.at("loss").get<double>(), p.at("grad_evals").get<std::uint64_t>(),
                         p.at("guessed_steps").get<std::uint64_t>(),
                         p.at("selection_digest").get<std::uint64_t>(),
                         p.at("budget_digest").get<std::uint64_t>()});
    }
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw IoError(std::string("experiment result: ") + e.what());
  }
}

std::string curve_csv(std::span<const CurvePoint> curve) {
  std::string out = "round,accuracy,loss,grad_evals,guessed_steps\n";
  for (const auto& p : curve) {
    out += std::to_string(p.round);
    out += ',';
    append_double(out, p.accuracy);
    out += ',';
    append_double(out, p.loss);
    out += ',';
    out += std::to_string(p.grad_evals);
    out += ',';
    out += std::to_string(p.guessed_steps);
    out += '\n';
  }
  return out;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
  if (!out) throw IoError("failed writing " + path.string());
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

ExperimentResult run_arm(const FederatedDataset& dataset, const TrainingConfig& base, const ArmSpec& arm,
                         std::uint64_t seed) {
  TrainingConfig cfg = base;
  cfg.budget = arm.budget;
  cfg.guesses = arm.guesses;
  cfg.seed = seed;
  const TrainingResult training = run_training(dataset, cfg);

  ExperimentResult r;
  r.arm = arm.label;
  r.budget = arm.budget.describe();
  r.guesses = arm.guesses.describe();
  r.seed = seed;
  r.target_accuracy = cfg.target_accuracy;
  r.curve = to_curve(training.rounds);
  if (cfg.target_accuracy) r.rounds_to_target = rounds_to_target(training.rounds, *cfg.target_accuracy);
  if (!training.rounds.empty()) {
    r.total_gradient_evaluations = training.rounds.back().cumulative_gradient_evaluations;
    r.total_guessed_steps = training.rounds.back().cumulative_guessed_steps;
  }
  return r;
}

std::vector<ExperimentResult> run_paired(const FederatedDataset& dataset, const PairedConfig& config) {
  if (config.arms.empty()) throw ConfigError("paired run needs at least one arm");
  for (const auto& arm : config.arms) {
    if (arm.label.empty()) throw ConfigError("paired run: arm without a label");
  }
  for (std::size_t i = 0; i < config.arms.size(); ++i) {
    for (std::size_t j = i + 1; j < config.arms.size(); ++j) {
      if (config.arms[i].label == config.arms[j].label) {
        throw ConfigError("paired run: duplicate arm label '" + config.arms[i].label + "'");
      }
    }
  }
  if (config.seeds.size() < config.min_replicates) {
    throw ConfigError("paired run needs at least " + std::to_string(config.min_replicates) +
                      " replicate seeds, got " + std::to_string(config.seeds.size()));
  }

  const std::size_t arms = config.arms.size();
  std::vector<ExperimentResult> results(config.seeds.size() * arms);
  parallel_for(results.size(), config.jobs, [&](std::size_t i) {
    results[i] = run_arm(dataset, config.base, config.arms[i % arms], config.seeds[i / arms]);
  });
  return results;
}

std::vector<ArmSummary> summarize(std::span<const ExperimentResult> results) {
  std::vector<ArmSummary> out;
  std::vector<double> grad_sums;
  std::vector<double> round_sums;
  for (const auto& r : results) {
    auto it = std::find_if(out.begin(), out.end(), [&](const ArmSummary& s) { return s.arm == r.arm; });
    if (it == out.end()) {
      ArmSummary fresh;
      fresh.arm = r.arm;
      out.push_back(std::move(fresh));
      grad_sums.push_back(0.0);
      round_sums.push_back(0.0);
      it = std::prev(out.end());
    }
    const auto idx = static_cast<std::size_t>(std::distance(out.begin(), it));
    ++it->runs;
    grad_sums[idx] += static_cast<double>(r.total_gradient_evaluations);
    if (r.rounds_to_target) {
      ++it->reached;
      const std::size_t cr = *r.rounds_to_target;
      round_sums[idx] += static_cast<double>(cr);
      it->min_rounds = it->min_rounds ? std::min(*it->min_rounds, cr) : cr;
      it->max_rounds = it->max_rounds ? std::max(*it->max_rounds, cr) : cr;
    }
  }
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i].mean_gradient_evaluations = grad_sums[i] / static_cast<double>(out[i].runs);
    if (out[i].reached > 0) out[i].mean_rounds = round_sums[i] / static_cast<double>(out[i].reached);
  }
  return out;
}

std::optional<double> mean_paired_speedup(std::span<const ExperimentResult> results,
                                          const std::string& baseline_arm, const std::string& gel_arm) {
  std::map<std::uint64_t, std::pair<std::optional<std::size_t>, std::optional<std::size_t>>> by_seed;
  for (const auto& r : results) {
    if (r.arm == baseline_arm) by_seed[r.seed].first = r.rounds_to_target;
    if (r.arm == gel_arm) by_seed[r.seed].second = r.rounds_to_target;
  }
  double sum = 0.0;
  std::size_t n = 0;
  for (const auto& [seed, crs] : by_seed) {
    if (auto s = speedup(crs.first, crs.second)) {
      sum += *s;
      ++n;
    }
  }
  if (n == 0) return std::nullopt;
  return sum / static_cast<double>(n);
}

std::vector<SweepCell> run_sweep(const FederatedDataset& dataset, const SweepConfig& config) {
  if (config.u_primes.empty() || config.percentages.empty()) throw ConfigError("sweep grid is empty");
  if (config.seeds.empty()) throw ConfigError("sweep needs at least one seed");

  // Unique (budget, guess policy) runs; keyed by their descriptions.
  std::vector<ArmSpec> unique_arms;
  auto arm_index = [&](const ArmSpec& spec) {
    for (std::size_t i = 0; i < unique_arms.size(); ++i) {
      if (unique_arms[i].budget == spec.budget && unique_arms[i].guesses == spec.guesses) return i;
    }
    unique_arms.push_back(spec);
    return unique_arms.size() - 1;
  };

  struct CellArms {
    std::size_t baseline, gel, target;
  };
  std::vector<SweepCell> cells;
  std::vector<CellArms> cell_arms;
  for (std::size_t u : config.u_primes) {
    for (double pct : config.percentages) {
      SweepCell cell;
      cell.u_prime = u;
      cell.percentage = pct;
      const GuessPolicy policy = GuessPolicy::percent(pct);
      cell.g_prime = policy.resolve(u);
      cell_arms.push_back({arm_index({"Baseline", BudgetModel::homogeneous(u), GuessPolicy::none()}),
                           arm_index({"GeL", BudgetModel::homogeneous(u), policy}),
                           arm_index({"Target", BudgetModel::homogeneous(u + cell.g_prime), GuessPolicy::none()})});
      cells.push_back(std::move(cell));
    }
  }

  const std::size_t n_arms = unique_arms.size();
  std::vector<ExperimentResult> runs(n_arms * config.seeds.size());
  parallel_for(runs.size(), config.jobs, [&](std::size_t i) {
    runs[i] = run_arm(dataset, config.base, unique_arms[i % n_arms], config.seeds[i / n_arms]);
  });

  for (std::size_t c = 0; c < cells.size(); ++c) {
    auto& cell = cells[c];
    for (std::size_t s = 0; s < config.seeds.size(); ++s) {
      for (auto [idx, label] : {std::pair{cell_arms[c].baseline, "Baseline"}, std::pair{cell_arms[c].gel, "GeL"},
                                std::pair{cell_arms[c].target, "Target"}}) {
        ExperimentResult r = runs[s * n_arms + idx];
        r.arm = label;
        cell.results.push_back(std::move(r));
      }
    }
    const auto summary = summarize(cell.results);
    for (const auto& s : summary) {
      if (s.arm == "Baseline") cell.baseline = s;
      if (s.arm == "GeL") cell.gel = s;
      if (s.arm == "Target") cell.target = s;
    }
  }
  return cells;
}

double calibrate_target(const FederatedDataset& dataset, const TrainingConfig& base, const ArmSpec& arm,
                        std::span<const std::uint64_t> seeds, std::size_t horizon, double pct) {
  if (seeds.empty()) throw ConfigError("calibration needs at least one seed");
  if (horizon < 1) throw ConfigError("calibration horizon must be at least one round");
  TrainingConfig cfg = base;
  cfg.target_accuracy.reset();
  cfg.max_rounds = horizon;
  std::vector<double> finals;
  for (std::uint64_t seed : seeds) {
    const auto r = run_arm(dataset, cfg, arm, seed);
    finals.push_back(r.curve.back().accuracy);
  }
  return percentile(std::move(finals), pct);
}

}  // namespace gel
