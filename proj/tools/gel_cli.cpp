// gel: command-line driver for guess-and-learn federated experiments.
//
//   gel gen-data --config exp.json --out data/
//   gel train    --config exp.json --budget 4 --guesses 4 --out runs/single
//   gel paired   --config exp.json --out runs/paired
//   gel sweep    --config exp.json --out runs/sweep
//   gel report   --in runs/paired
//
// Exit status: 0 on success (a run that never reaches its target still
// succeeds; the summary says so), 1 for configuration errors, 2 for I/O
// errors.

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "gel/config.hpp"
#include "gel/errors.hpp"
#include "gel/harness.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Overrides {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> replicates;
  std::optional<std::size_t> clients_per_round;
  std::optional<std::size_t> batch_size;
  std::optional<std::size_t> budget;
  std::vector<std::size_t> budget_range;
  std::optional<std::size_t> guesses;
  std::optional<double> guess_pct;
  std::optional<double> target_acc;
  std::optional<std::size_t> max_rounds;
  std::optional<std::size_t> threads;
  std::optional<std::size_t> jobs;
  std::optional<std::string> data;
  std::optional<std::string> model;
  std::string out = "out";
};

void add_common_flags(CLI::App* cmd, Overrides& o) {
  cmd->add_option("--config", o.config_path, "Experiment config (JSON)");
  cmd->add_option("--seed", o.seed, "Master seed (paired/sweep: first of consecutive replicate seeds)");
  cmd->add_option("--replicates", o.replicates, "Number of replicate seeds for paired/sweep");
  cmd->add_option("--clients-per-round", o.clients_per_round, "Clients selected per round (K)");
  cmd->add_option("--batch-size", o.batch_size, "Local mini-batch size (B)");
  cmd->add_option("--budget", o.budget, "Homogeneous budget u (paired: u')");
  cmd->add_option("--budget-range", o.budget_range, "Heterogeneous budget range a b")->expected(2);
  auto* g = cmd->add_option("--guesses", o.guesses, "Fixed number of guesses g (paired: g')");
  auto* p = cmd->add_option("--guess-pct", o.guess_pct, "Guesses as a percentage of the budget");
  g->excludes(p);
  cmd->add_option("--target-acc", o.target_acc, "Target pooled test accuracy");
  cmd->add_option("--max-rounds", o.max_rounds, "Maximum number of rounds");
  cmd->add_option("--threads", o.threads, "Concurrent client updates per round");
  cmd->add_option("--jobs", o.jobs, "Concurrent runs for paired/sweep");
  cmd->add_option("--data", o.data, "Exported dataset stem to load instead of generating");
  cmd->add_option("--model", o.model, "Model kind: logreg or mlp");
  cmd->add_option("--out", o.out, "Output directory");
}

enum class Command { gen_data, train, paired, sweep };

gel::ExperimentConfig resolve_config(const Overrides& o, Command command) {
  gel::ExperimentConfig cfg =
      o.config_path.empty() ? gel::ExperimentConfig{} : gel::load_experiment_config(o.config_path);

  if (o.seed) {
    cfg.training.seed = *o.seed;
    const std::size_t n = o.replicates.value_or(cfg.seeds.size());
    cfg.seeds.clear();
    for (std::size_t i = 0; i < n; ++i) cfg.seeds.push_back(*o.seed + i);
  } else if (o.replicates) {
    const std::uint64_t first = cfg.seeds.empty() ? 1 : cfg.seeds.front();
    cfg.seeds.clear();
    for (std::size_t i = 0; i < *o.replicates; ++i) cfg.seeds.push_back(first + i);
  }
  if (o.clients_per_round) cfg.training.clients_per_round = *o.clients_per_round;
  if (o.batch_size) cfg.training.batch_size = *o.batch_size;
  if (o.target_acc) cfg.training.target_accuracy = *o.target_acc;
  if (o.max_rounds) cfg.training.max_rounds = *o.max_rounds;
  if (o.threads) cfg.training.threads = *o.threads;
  if (o.jobs) cfg.jobs = *o.jobs;
  if (o.data) cfg.data.path = *o.data;
  if (o.model) cfg.training.model.kind = gel::parse_model_kind(*o.model);

  if (command == Command::paired) {
    if (o.budget) {
      cfg.paired.mode = gel::PairedMode::homogeneous;
      cfg.paired.u_prime = *o.budget;
    }
    if (!o.budget_range.empty()) {
      cfg.paired.mode = gel::PairedMode::heterogeneous;
      cfg.paired.budget_range = gel::BudgetModel::uniform(o.budget_range[0], o.budget_range[1]);
    }
    if (o.guesses) {
      cfg.paired.g_prime = *o.guesses;
      cfg.paired.hetero_guesses = gel::GuessPolicy::fixed(*o.guesses);
    }
    if (o.guess_pct) {
      if (cfg.paired.mode == gel::PairedMode::homogeneous) {
        cfg.paired.g_prime = gel::GuessPolicy::percent(*o.guess_pct).resolve(cfg.paired.u_prime);
      } else {
        cfg.paired.hetero_guesses = gel::GuessPolicy::percent(*o.guess_pct);
      }
    }
  } else {
    if (o.budget) cfg.training.budget = gel::BudgetModel::homogeneous(*o.budget);
    if (!o.budget_range.empty()) {
      cfg.training.budget = gel::BudgetModel::uniform(o.budget_range[0], o.budget_range[1]);
    }
    if (o.guesses) cfg.training.guesses = gel::GuessPolicy::fixed(*o.guesses);
    if (o.guess_pct) cfg.training.guesses = gel::GuessPolicy::percent(*o.guess_pct);
    if (command == Command::sweep && o.budget) cfg.sweep_u_primes = {*o.budget};
  }
  return cfg;
}

std::string iso_timestamp() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&t));
  return buf;
}

void write_manifest(const fs::path& out, const std::string& command, const gel::ExperimentConfig& cfg,
                    const gel::FederatedDataset& dataset, double seconds, const json& extra = json::object()) {
  json manifest;
  manifest["command"] = command;
  manifest["created"] = iso_timestamp();
  manifest["config"] = json::parse(gel::to_json(cfg));
  manifest["dataset"] = {{"clients", dataset.stats.clients},
                         {"total_samples", dataset.stats.total_samples},
                         {"median_client_samples", dataset.stats.median_client_samples},
                         {"feature_dim", dataset.feature_dim},
                         {"classes", dataset.classes}};
  manifest["wall_seconds"] = seconds;
  manifest["extra"] = extra;
  gel::write_text(out / "manifest.json", manifest.dump(2) + "\n");
}

std::string run_stem(const gel::ExperimentResult& r) {
  return r.arm + "_seed" + std::to_string(r.seed);
}

json summary_json(const gel::ArmSummary& s) {
  json js;
  js["arm"] = s.arm;
  js["runs"] = s.runs;
  js["reached"] = s.reached;
  js["mean_rounds"] = s.mean_rounds ? json(*s.mean_rounds) : json();
  js["min_rounds"] = s.min_rounds ? json(*s.min_rounds) : json();
  js["max_rounds"] = s.max_rounds ? json(*s.max_rounds) : json();
  js["mean_gradient_evaluations"] = s.mean_gradient_evaluations;
  return js;
}

void write_results(const fs::path& dir, const std::vector<gel::ExperimentResult>& results) {
  for (const auto& r : results) {
    gel::write_text(dir / (run_stem(r) + ".csv"), gel::curve_csv(r.curve));
    gel::write_text(dir / (run_stem(r) + ".result.json"), gel::to_json(r) + "\n");
  }
}

// Savings per seed from integer CRs of the GeL and Target arms.
json savings_json(const std::vector<gel::ExperimentResult>& results, std::size_t u_prime, std::size_t g_prime,
                  std::size_t clients) {
  std::map<std::uint64_t, std::pair<std::optional<std::size_t>, std::optional<std::size_t>>> crs;
  for (const auto& r : results) {
    if (r.arm == "Target") crs[r.seed].first = r.rounds_to_target;
    if (r.arm == "GeL") crs[r.seed].second = r.rounds_to_target;
  }
  json per_seed = json::array();
  for (const auto& [seed, pair] : crs) {
    json entry{{"seed", seed}};
    if (pair.first && pair.second) {
      entry["savings"] = gel::compute_savings(static_cast<std::int64_t>(*pair.first),
                                              static_cast<std::int64_t>(*pair.second),
                                              static_cast<std::int64_t>(u_prime),
                                              static_cast<std::int64_t>(g_prime),
                                              static_cast<std::int64_t>(clients));
    } else {
      entry["savings"] = nullptr;
    }
    per_seed.push_back(entry);
  }
  return per_seed;
}

std::string opt_str(const std::optional<double>& v, const char* missing = "n/a") {
  if (!v) return missing;
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.1f", *v);
  return buf;
}

void print_summaries(const std::vector<gel::ArmSummary>& summaries) {
  std::printf("%-10s %5s %8s %10s %8s %8s %14s\n", "arm", "runs", "reached", "mean_CR", "min_CR", "max_CR",
              "mean_grads");
  for (const auto& s : summaries) {
    std::printf("%-10s %5zu %8zu %10s %8s %8s %14.0f\n", s.arm.c_str(), s.runs, s.reached,
                opt_str(s.mean_rounds).c_str(),
                s.min_rounds ? std::to_string(*s.min_rounds).c_str() : "n/a",
                s.max_rounds ? std::to_string(*s.max_rounds).c_str() : "n/a", s.mean_gradient_evaluations);
  }
}

// Fills in the target accuracy from the calibration arm when unset.
json maybe_calibrate(gel::ExperimentConfig& cfg, const gel::FederatedDataset& dataset,
                     const std::vector<gel::ArmSpec>& arms) {
  if (cfg.training.target_accuracy || !cfg.calibration) return nullptr;
  const auto& cal = *cfg.calibration;
  auto it = std::find_if(arms.begin(), arms.end(), [&](const gel::ArmSpec& a) { return a.label == cal.arm; });
  if (it == arms.end()) throw gel::ConfigError("calibration arm '" + cal.arm + "' is not among the arms");
  const double target = gel::calibrate_target(dataset, cfg.training, *it, cfg.seeds, cal.horizon, cal.percentile);
  cfg.training.target_accuracy = target;
  std::printf("calibrated target accuracy %.4f (%s arm, P%.0f of final accuracy after %zu rounds)\n", target,
              cal.arm.c_str(), cal.percentile, cal.horizon);
  return json{{"arm", cal.arm}, {"percentile", cal.percentile}, {"horizon", cal.horizon}, {"target", target}};
}

int cmd_gen_data(const Overrides& o) {
  auto cfg = resolve_config(o, Command::gen_data);
  const auto started = std::chrono::steady_clock::now();
  const auto dataset = gel::materialize_dataset(cfg);
  const fs::path out(o.out);
  json meta{{"generator", "synthetic"},
            {"seed", cfg.data.seed},
            {"alpha", cfg.data.synthetic.alpha},
            {"beta", cfg.data.synthetic.beta},
            {"min_samples", cfg.data.synthetic.min_samples},
            {"iid", cfg.data.iid}};
  gel::export_dataset(dataset, out / "dataset", meta.dump());
  write_manifest(out, "gen-data", cfg, dataset,
                 std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count());
  std::printf("wrote %s (%zu clients, %zu samples, median %zu per client)\n", (out / "dataset.csv").c_str(),
              dataset.stats.clients, dataset.stats.total_samples, dataset.stats.median_client_samples);
  return 0;
}

int cmd_train(const Overrides& o) {
  auto cfg = resolve_config(o, Command::train);
  const auto started = std::chrono::steady_clock::now();
  const auto dataset = gel::materialize_dataset(cfg);
  const fs::path out(o.out);

  const auto training = gel::run_training(dataset, cfg.training);
  gel::ExperimentResult r;
  r.arm = "run";
  r.budget = cfg.training.budget.describe();
  r.guesses = cfg.training.guesses.describe();
  r.seed = cfg.training.seed;
  r.target_accuracy = cfg.training.target_accuracy;
  r.curve = gel::to_curve(training.rounds);
  if (cfg.training.target_accuracy) {
    r.rounds_to_target = gel::rounds_to_target(training.rounds, *cfg.training.target_accuracy);
  }
  if (!training.rounds.empty()) {
    r.total_gradient_evaluations = training.rounds.back().cumulative_gradient_evaluations;
    r.total_guessed_steps = training.rounds.back().cumulative_guessed_steps;
  }

  gel::write_text(out / "run.csv", gel::curve_csv(r.curve));
  gel::write_text(out / "run.result.json", gel::to_json(r) + "\n");
  gel::save_checkpoint(training.final_model, training.rounds.size(), out / "checkpoint");

  json summary;
  summary["rounds"] = training.rounds.size();
  summary["target_accuracy"] = r.target_accuracy ? json(*r.target_accuracy) : json();
  summary["rounds_to_target"] = r.rounds_to_target ? json(*r.rounds_to_target) : json();
  summary["target_reached"] = training.target_reached;
  summary["final_accuracy"] = training.rounds.empty() ? json() : json(training.rounds.back().test_accuracy);
  summary["total_gradient_evaluations"] = r.total_gradient_evaluations;
  summary["total_guessed_steps"] = r.total_guessed_steps;
  gel::write_text(out / "summary.json", summary.dump(2) + "\n");
  write_manifest(out, "train", cfg, dataset,
                 std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count());

  std::printf("%zu rounds, final accuracy %s, CR %s, %llu gradient evaluations, %llu guessed steps\n",
              training.rounds.size(),
              training.rounds.empty() ? "n/a" : std::to_string(training.rounds.back().test_accuracy).c_str(),
              r.rounds_to_target ? std::to_string(*r.rounds_to_target).c_str() : "not reached",
              static_cast<unsigned long long>(r.total_gradient_evaluations),
              static_cast<unsigned long long>(r.total_guessed_steps));
  return 0;
}

int cmd_paired(const Overrides& o) {
  auto cfg = resolve_config(o, Command::paired);
  const auto started = std::chrono::steady_clock::now();
  const auto dataset = gel::materialize_dataset(cfg);
  const fs::path out(o.out);
  const auto arms = gel::paired_arms(cfg.paired);
  const json calibration = maybe_calibrate(cfg, dataset, arms);

  gel::PairedConfig paired;
  paired.base = cfg.training;
  paired.arms = arms;
  paired.seeds = cfg.seeds;
  paired.jobs = cfg.jobs;
  const auto results = gel::run_paired(dataset, paired);
  write_results(out, results);

  const auto summaries = gel::summarize(results);
  json summary;
  summary["target_accuracy"] = cfg.training.target_accuracy ? json(*cfg.training.target_accuracy) : json();
  summary["calibration"] = calibration;
  summary["arms"] = json::array();
  for (const auto& s : summaries) summary["arms"].push_back(summary_json(s));
  const auto sp = gel::mean_paired_speedup(results, "Baseline", "GeL");
  summary["speedup"] = sp ? json(*sp) : json();
  if (cfg.paired.mode == gel::PairedMode::homogeneous) {
    summary["savings"] = savings_json(results, cfg.paired.u_prime, cfg.paired.g_prime, cfg.training.clients_per_round);
    double total = 0.0;
    std::size_t n = 0;
    for (const auto& e : summary["savings"]) {
      if (!e["savings"].is_null()) {
        total += e["savings"].get<double>();
        ++n;
      }
    }
    summary["mean_savings"] = n ? json(total / static_cast<double>(n)) : json();
  }
  gel::write_text(out / "summary.json", summary.dump(2) + "\n");
  write_manifest(out, "paired", cfg, dataset,
                 std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count());

  print_summaries(summaries);
  std::printf("speedup (Baseline/GeL, mean over seeds): %s\n", sp ? std::to_string(*sp).c_str() : "n/a");
  return 0;
}

int cmd_sweep(const Overrides& o) {
  auto cfg = resolve_config(o, Command::sweep);
  const auto started = std::chrono::steady_clock::now();
  const auto dataset = gel::materialize_dataset(cfg);
  const fs::path out(o.out);
  if (!cfg.training.target_accuracy && cfg.calibration) {
    // Calibrate on the Target arm of the first grid column.
    const auto u = cfg.sweep_u_primes.front();
    const auto g = gel::GuessPolicy::percent(cfg.sweep_percentages.front()).resolve(u);
    (void)maybe_calibrate(cfg, dataset, gel::standard_arms(u, g));
  }
  if (!cfg.training.target_accuracy) throw gel::ConfigError("sweep needs a target accuracy or a calibration block");

  gel::SweepConfig sweep;
  sweep.base = cfg.training;
  sweep.u_primes = cfg.sweep_u_primes;
  sweep.percentages = cfg.sweep_percentages;
  sweep.seeds = cfg.seeds;
  sweep.jobs = cfg.jobs;
  const auto cells = gel::run_sweep(dataset, sweep);

  std::string table = "u_prime,guess_pct,g_prime,arm,runs,reached,mean_rounds,mean_grad_evals\n";
  json summary;
  summary["target_accuracy"] = *cfg.training.target_accuracy;
  summary["cells"] = json::array();
  for (const auto& cell : cells) {
    json jc{{"u_prime", cell.u_prime}, {"guess_pct", cell.percentage}, {"g_prime", cell.g_prime}};
    for (const auto* s : {&cell.baseline, &cell.gel, &cell.target}) {
      jc[s->arm] = summary_json(*s);
      char row[256];
      std::snprintf(row, sizeof(row), "%zu,%g,%zu,%s,%zu,%zu,%s,%.1f\n", cell.u_prime, cell.percentage,
                    cell.g_prime, s->arm.c_str(), s->runs, s->reached,
                    opt_str(s->mean_rounds, "").c_str(), s->mean_gradient_evaluations);
      table += row;
    }
    const fs::path cell_dir = out / ("u" + std::to_string(cell.u_prime) + "_p" +
                                     std::to_string(static_cast<int>(cell.percentage)));
    write_results(cell_dir, cell.results);
    summary["cells"].push_back(jc);
  }
  gel::write_text(out / "sweep.csv", table);
  gel::write_text(out / "summary.json", summary.dump(2) + "\n");
  write_manifest(out, "sweep", cfg, dataset,
                 std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count());
  std::fputs(table.c_str(), stdout);
  return 0;
}

int cmd_report(const std::string& in_dir) {
  const fs::path dir(in_dir);
  if (!fs::is_directory(dir)) throw gel::IoError(in_dir + " is not a directory");
  std::vector<fs::path> files;
  for (const auto& entry : fs::recursive_directory_iterator(dir)) {
    const auto name = entry.path().filename().string();
    if (entry.is_regular_file() && name.ends_with(".result.json")) files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  if (files.empty()) throw gel::IoError("no *.result.json files under " + in_dir);

  // Group by directory so sweep cells are reported separately.
  std::map<fs::path, std::vector<gel::ExperimentResult>> groups;
  for (const auto& f : files) groups[f.parent_path()].push_back(gel::experiment_result_from_json(gel::read_text(f)));

  std::string csv = "group,arm,runs,reached,mean_rounds,min_rounds,max_rounds,mean_grad_evals,speedup\n";
  for (const auto& [group, results] : groups) {
    const auto rel = fs::relative(group, dir).string();
    std::printf("== %s\n", rel.c_str());
    const auto summaries = gel::summarize(results);
    print_summaries(summaries);
    const auto sp = gel::mean_paired_speedup(results, "Baseline", "GeL");
    if (sp) std::printf("speedup (Baseline/GeL): %.3f\n", *sp);
    for (const auto& s : summaries) {
      char row[256];
      std::snprintf(row, sizeof(row), "%s,%s,%zu,%zu,%s,%s,%s,%.1f,%s\n", rel.c_str(), s.arm.c_str(), s.runs,
                    s.reached, opt_str(s.mean_rounds, "").c_str(),
                    s.min_rounds ? std::to_string(*s.min_rounds).c_str() : "",
                    s.max_rounds ? std::to_string(*s.max_rounds).c_str() : "", s.mean_gradient_evaluations,
                    sp ? std::to_string(*sp).c_str() : "");
      csv += row;
    }
  }
  gel::write_text(dir / "report.csv", csv);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Guess-and-learn federated learning simulator"};
  app.require_subcommand(1);

  Overrides gen_o, train_o, paired_o, sweep_o;
  auto* gen = app.add_subcommand("gen-data", "Generate and export the synthetic federated dataset");
  add_common_flags(gen, gen_o);
  auto* train = app.add_subcommand("train", "Run one training configuration");
  add_common_flags(train, train_o);
  auto* paired = app.add_subcommand("paired", "Paired Baseline / GeL / Target runs over replicate seeds");
  add_common_flags(paired, paired_o);
  auto* sweep = app.add_subcommand("sweep", "Guess-percentage by budget sweep");
  add_common_flags(sweep, sweep_o);
  std::string report_in;
  auto* report = app.add_subcommand("report", "Summarise result files in a run directory");
  report->add_option("--in", report_in, "Run directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (*gen) return cmd_gen_data(gen_o);
    if (*train) return cmd_train(train_o);
    if (*paired) return cmd_paired(paired_o);
    if (*sweep) return cmd_sweep(sweep_o);
    if (*report) return cmd_report(report_in);
  } catch (const gel::IoError& e) {
    std::cerr << "gel: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "gel: " << e.what() << '\n';
    return 1;
  }
  return 1;
}
