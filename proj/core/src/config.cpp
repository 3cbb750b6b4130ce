#include "gel/config.hpp"

#include <nlohmann/json.hpp>

#include "gel/errors.hpp"

namespace gel {
namespace {

using nlohmann::json;

template <typename T>
void read_opt(const json& obj, const char* key, T& dst) {
  if (obj.contains(key) && !obj.at(key).is_null()) dst = obj.at(key).get<T>();
}

BudgetModel parse_budget(const json& obj, BudgetModel fallback) {
  if (obj.contains("budget_preset")) return budget_preset(obj.at("budget_preset").get<std::string>());
  if (obj.contains("budget_range")) {
    const auto range = obj.at("budget_range").get<std::vector<std::size_t>>();
    if (range.size() != 2) throw ConfigError("budget_range must be [a, b]");
    return BudgetModel::uniform(range[0], range[1]);
  }
  if (obj.contains("budget")) return BudgetModel::homogeneous(obj.at("budget").get<std::size_t>());
  return fallback;
}

GuessPolicy parse_guesses(const json& obj, GuessPolicy fallback) {
  if (obj.contains("guess_pct") && obj.contains("guesses")) {
    throw ConfigError("set either guesses or guess_pct, not both");
  }
  if (obj.contains("guess_pct")) return GuessPolicy::percent(obj.at("guess_pct").get<double>());
  if (obj.contains("guesses")) return GuessPolicy::fixed(obj.at("guesses").get<std::size_t>());
  return fallback;
}

void write_budget(json& obj, const BudgetModel& budget) {
  if (budget.kind() == BudgetModel::Kind::homogeneous) {
    obj["budget"] = budget.low();
  } else {
    obj["budget_range"] = {budget.low(), budget.high()};
  }
}

void write_guesses(json& obj, const GuessPolicy& policy) {
  if (policy.kind() == GuessPolicy::Kind::fixed_count) {
    obj["guesses"] = static_cast<std::size_t>(policy.value());
  } else {
    obj["guess_pct"] = policy.value();
  }
}

}  // namespace

ExperimentConfig parse_experiment_config(const std::string& json_text) {
  ExperimentConfig cfg;
  try {
    const json root = json::parse(json_text);
    if (!root.is_object()) throw ConfigError("config root must be an object");
    read_opt(root, "seed", cfg.training.seed);
    read_opt(root, "seeds", cfg.seeds);
    read_opt(root, "jobs", cfg.jobs);

    if (root.contains("data")) {
      const json& d = root.at("data");
      auto& s = cfg.data.synthetic;
      read_opt(d, "clients", s.num_clients);
      read_opt(d, "alpha", s.alpha);
      read_opt(d, "beta", s.beta);
      read_opt(d, "feature_dim", s.feature_dim);
      read_opt(d, "classes", s.classes);
      read_opt(d, "min_samples", s.min_samples);
      read_opt(d, "test_fraction", s.test_fraction);
      read_opt(d, "seed", cfg.data.seed);
      read_opt(d, "iid", cfg.data.iid);
      if (d.contains("path") && !d.at("path").is_null()) cfg.data.path = d.at("path").get<std::string>();
    }
    if (root.contains("model")) {
      const json& m = root.at("model");
      if (m.contains("kind")) cfg.training.model.kind = parse_model_kind(m.at("kind").get<std::string>());
      read_opt(m, "hidden", cfg.training.model.hidden);
    }
    if (root.contains("training")) {
      const json& t = root.at("training");
      read_opt(t, "clients_per_round", cfg.training.clients_per_round);
      read_opt(t, "batch_size", cfg.training.batch_size);
      cfg.training.budget = parse_budget(t, cfg.training.budget);
      cfg.training.guesses = parse_guesses(t, cfg.training.guesses);
      if (t.contains("target_accuracy") && !t.at("target_accuracy").is_null()) {
        cfg.training.target_accuracy = t.at("target_accuracy").get<double>();
      }
      read_opt(t, "max_rounds", cfg.training.max_rounds);
      read_opt(t, "threads", cfg.training.threads);
      if (t.contains("adam")) {
        const json& a = t.at("adam");
        read_opt(a, "alpha", cfg.training.adam.alpha);
        read_opt(a, "beta", cfg.training.adam.beta);
        read_opt(a, "epsilon", cfg.training.adam.epsilon);
        read_opt(a, "delta", cfg.training.adam.delta);
      }
    }
    if (root.contains("paired")) {
      const json& p = root.at("paired");
      if (p.contains("mode")) {
        const auto mode = p.at("mode").get<std::string>();
        if (mode == "homogeneous") {
          cfg.paired.mode = PairedMode::homogeneous;
        } else if (mode == "heterogeneous") {
          cfg.paired.mode = PairedMode::heterogeneous;
        } else {
          throw ConfigError("paired.mode must be homogeneous or heterogeneous");
        }
      }
      read_opt(p, "u_prime", cfg.paired.u_prime);
      read_opt(p, "g_prime", cfg.paired.g_prime);
      cfg.paired.budget_range = parse_budget(p, cfg.paired.budget_range);
      cfg.paired.hetero_guesses = parse_guesses(p, cfg.paired.hetero_guesses);
    }
    if (root.contains("sweep")) {
      const json& s = root.at("sweep");
      read_opt(s, "u_primes", cfg.sweep_u_primes);
      read_opt(s, "percentages", cfg.sweep_percentages);
    }
    if (root.contains("calibration") && !root.at("calibration").is_null()) {
      const json& c = root.at("calibration");
      CalibrationConfig cal;
      read_opt(c, "arm", cal.arm);
      read_opt(c, "percentile", cal.percentile);
      read_opt(c, "horizon", cal.horizon);
      cfg.calibration = cal;
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  return cfg;
}

ExperimentConfig load_experiment_config(const std::filesystem::path& path) {
  try {
    return parse_experiment_config(read_text(path));
  } catch (const ConfigError& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

std::string to_json(const ExperimentConfig& cfg) {
  json root;
  root["seed"] = cfg.training.seed;
  root["seeds"] = cfg.seeds;
  root["jobs"] = cfg.jobs;

  const auto& s = cfg.data.synthetic;
  root["data"] = {{"clients", s.num_clients},     {"alpha", s.alpha},
                  {"beta", s.beta},               {"feature_dim", s.feature_dim},
                  {"classes", s.classes},         {"min_samples", s.min_samples},
                  {"test_fraction", s.test_fraction}, {"seed", cfg.data.seed},
                  {"iid", cfg.data.iid}};
  root["data"]["path"] = cfg.data.path ? json(cfg.data.path->string()) : json();

  root["model"] = {{"kind", to_string(cfg.training.model.kind)}, {"hidden", cfg.training.model.hidden}};

  json t;
  t["clients_per_round"] = cfg.training.clients_per_round;
  t["batch_size"] = cfg.training.batch_size;
  write_budget(t, cfg.training.budget);
  write_guesses(t, cfg.training.guesses);
  t["target_accuracy"] = cfg.training.target_accuracy ? json(*cfg.training.target_accuracy) : json();
  t["max_rounds"] = cfg.training.max_rounds;
  t["threads"] = cfg.training.threads;
  t["adam"] = {{"alpha", cfg.training.adam.alpha},
               {"beta", cfg.training.adam.beta},
               {"epsilon", cfg.training.adam.epsilon},
               {"delta", cfg.training.adam.delta}};
  root["training"] = t;

  json p;
  p["mode"] = cfg.paired.mode == PairedMode::homogeneous ? "homogeneous" : "heterogeneous";
  p["u_prime"] = cfg.paired.u_prime;
  p["g_prime"] = cfg.paired.g_prime;
  write_budget(p, cfg.paired.budget_range);
  write_guesses(p, cfg.paired.hetero_guesses);
  root["paired"] = p;

  root["sweep"] = {{"u_primes", cfg.sweep_u_primes}, {"percentages", cfg.sweep_percentages}};
  if (cfg.calibration) {
    root["calibration"] = {{"arm", cfg.calibration->arm},
                           {"percentile", cfg.calibration->percentile},
                           {"horizon", cfg.calibration->horizon}};
  } else {
    root["calibration"] = nullptr;
  }
  return root.dump(2);
}

FederatedDataset materialize_dataset(ExperimentConfig& config) {
  FederatedDataset dataset;
  if (config.data.path) {
    dataset = import_dataset(*config.data.path);
  } else {
    RngStream stream = seeded_stream(config.data.seed, "data");
    dataset = generate_synthetic(config.data.synthetic, stream);
    if (config.data.iid) {
      RngStream shuffle = seeded_stream(config.data.seed, "iid");
      dataset = partition_iid(dataset, shuffle);
    }
  }
  config.training.model.features = dataset.feature_dim;
  config.training.model.classes = dataset.classes;
  return dataset;
}

std::vector<ArmSpec> paired_arms(const PairedSettings& settings) {
  if (settings.mode == PairedMode::homogeneous) return standard_arms(settings.u_prime, settings.g_prime);
  return heterogeneous_arms(settings.budget_range, settings.hetero_guesses);
}

}  // namespace gel
