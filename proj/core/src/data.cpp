#include "gel/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>
#include <string>

#include <nlohmann/json.hpp>

#include "gel/errors.hpp"

namespace gel {
namespace {

template <typename T>
void shuffle_in_place(std::vector<T>& items, RngStream& stream) {
  for (std::size_t i = items.size(); i > 1; --i) {
    const auto j = static_cast<std::size_t>(stream.uniform_int(0, i - 1));
    std::swap(items[i - 1], items[j]);
  }
}

std::size_t test_count(std::size_t n, double test_fraction) {
  auto count = static_cast<std::size_t>(std::floor(test_fraction * static_cast<double>(n)));
  // Keep at least one training sample.
  return std::min(count, n - 1);
}

void append_double(std::string& out, double value) {
  char buf[32];
  const auto result = std::to_chars(buf, buf + sizeof(buf), value);
  out.append(buf, result.ptr);
}

template <typename T>
T parse_number(std::string_view field, std::size_t line_no) {
  T value{};
  const auto* first = field.data();
  const auto* last = field.data() + field.size();
  const auto result = std::from_chars(first, last, value);
  if (result.ec != std::errc() || result.ptr != last) {
    throw IoError("dataset csv line " + std::to_string(line_no) + ": cannot parse '" +
                  std::string(field) + "'");
  }
  return value;
}

}  // namespace

DatasetStats compute_stats(const std::vector<ClientShard>& shards) {
  DatasetStats stats;
  stats.clients = shards.size();
  std::vector<std::size_t> counts;
  counts.reserve(shards.size());
  for (const auto& shard : shards) {
    counts.push_back(shard.sample_count());
    stats.total_samples += shard.sample_count();
  }
  if (!counts.empty()) {
    std::sort(counts.begin(), counts.end());
    stats.median_client_samples = counts[(counts.size() - 1) / 2];
  }
  return stats;
}

void validate(const FederatedDataset& dataset) {
  if (dataset.shards.empty()) throw DomainError("dataset has no clients");
  for (const auto& shard : dataset.shards) {
    if (shard.sample_count() == 0) {
      throw DomainError("client " + std::to_string(shard.client_id) + " has no samples");
    }
    for (const Samples* s : {&shard.train, &shard.test}) {
      if (s->dim != dataset.feature_dim) throw DimensionError("shard feature dimension mismatch");
      for (int y : s->labels) {
        if (y < 0 || static_cast<std::size_t>(y) >= dataset.classes) {
          throw DomainError("label outside class range");
        }
      }
    }
  }
  if (compute_stats(dataset.shards) != dataset.stats) throw DomainError("dataset stats are stale");
}

FederatedDataset generate_synthetic(const SyntheticConfig& config, RngStream& stream) {
  if (config.num_clients < 1) throw DomainError("generate_synthetic: need at least one client");
  if (config.feature_dim < 1) throw DomainError("generate_synthetic: feature_dim must be >= 1");
  if (config.classes < 2) throw DomainError("generate_synthetic: need at least two classes");
  if (config.min_samples < 1) throw DomainError("generate_synthetic: min_samples must be >= 1");
  if (config.alpha < 0.0 || config.beta < 0.0) {
    throw DomainError("generate_synthetic: alpha and beta must be non-negative");
  }
  if (!(config.test_fraction >= 0.0 && config.test_fraction < 1.0)) {
    throw DomainError("generate_synthetic: test_fraction must be in [0, 1)");
  }

  const std::size_t d = config.feature_dim;
  const std::size_t classes = config.classes;

  std::vector<double> feature_std(d);
  for (std::size_t j = 0; j < d; ++j) feature_std[j] = std::pow(static_cast<double>(j + 1), -0.6);

  FederatedDataset out;
  out.feature_dim = d;
  out.classes = classes;
  out.test_fraction = config.test_fraction;
  out.shards.reserve(config.num_clients);

  const double log_median = std::log(2.0 * static_cast<double>(config.min_samples));
  std::uint64_t next_id = 0;
  std::vector<double> weights(d * classes), bias(classes), centre(d), x(d), logits(classes);

  for (std::size_t k = 0; k < config.num_clients; ++k) {
    const double model_mean = stream.normal(0.0, config.alpha);
    const double feature_mean = stream.normal(0.0, config.beta);
    for (double& w : weights) w = stream.normal(model_mean, 1.0);
    for (double& b : bias) b = stream.normal(model_mean, 1.0);
    for (double& c : centre) c = stream.normal(feature_mean, 1.0);

    const double draw = std::exp(stream.normal(log_median, 1.0));
    const auto n = std::max(config.min_samples, static_cast<std::size_t>(std::llround(draw)));

    Samples pooled;
    pooled.dim = d;
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < d; ++j) x[j] = stream.normal(centre[j], feature_std[j]);
      std::copy(bias.begin(), bias.end(), logits.begin());
      for (std::size_t j = 0; j < d; ++j) {
        for (std::size_t c = 0; c < classes; ++c) logits[c] += x[j] * weights[j * classes + c];
      }
      const auto label = std::distance(logits.begin(), std::max_element(logits.begin(), logits.end()));
      pooled.push_back(x, static_cast<int>(label), next_id++);
    }

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    shuffle_in_place(order, stream);
    const std::size_t n_test = test_count(n, config.test_fraction);

    ClientShard shard;
    shard.client_id = k;
    shard.train.dim = d;
    shard.test.dim = d;
    for (std::size_t pos = 0; pos < n; ++pos) {
      const std::size_t i = order[pos];
      Samples& dst = pos < n_test ? shard.test : shard.train;
      dst.push_back(pooled.view().row(i), pooled.labels[i], pooled.ids[i]);
    }
    out.shards.push_back(std::move(shard));
  }
  out.stats = compute_stats(out.shards);
  return out;
}

FederatedDataset partition_iid(const FederatedDataset& dataset, RngStream& stream) {
  if (dataset.shards.empty()) throw DomainError("partition_iid: dataset has no clients");
  const std::size_t d = dataset.feature_dim;

  struct Ref {
    const Samples* source;
    std::size_t row;
  };
  std::vector<Ref> pool;
  for (const auto& shard : dataset.shards) {
    for (std::size_t i = 0; i < shard.train.size(); ++i) pool.push_back({&shard.train, i});
    for (std::size_t i = 0; i < shard.test.size(); ++i) pool.push_back({&shard.test, i});
  }
  if (pool.empty()) throw DomainError("partition_iid: dataset has no samples");
  shuffle_in_place(pool, stream);

  const std::size_t clients = dataset.shards.size();
  if (pool.size() < clients) throw DomainError("partition_iid: fewer samples than clients");
  const std::size_t base = pool.size() / clients;
  const std::size_t extra = pool.size() % clients;

  FederatedDataset out;
  out.feature_dim = d;
  out.classes = dataset.classes;
  out.test_fraction = dataset.test_fraction;
  out.shards.reserve(clients);

  std::size_t cursor = 0;
  for (std::size_t k = 0; k < clients; ++k) {
    const std::size_t n = base + (k < extra ? 1 : 0);
    const std::size_t n_test = test_count(n, dataset.test_fraction);
    ClientShard shard;
    shard.client_id = k;
    shard.train.dim = d;
    shard.test.dim = d;
    for (std::size_t pos = 0; pos < n; ++pos) {
      const Ref& ref = pool[cursor++];
      Samples& dst = pos < n_test ? shard.test : shard.train;
      dst.push_back(ref.source->view().row(ref.row), ref.source->labels[ref.row],
                    ref.source->ids[ref.row]);
    }
    out.shards.push_back(std::move(shard));
  }
  out.stats = compute_stats(out.shards);
  return out;
}

Batch sample_batch(const ClientShard& shard, std::size_t batch_size, RngStream& stream) {
  if (shard.train.empty()) {
    throw EvaluationError("sample_batch: client " + std::to_string(shard.client_id) +
                          " has an empty train split");
  }
  if (batch_size < 1) throw DomainError("sample_batch: batch size must be >= 1");
  const auto view = shard.train.view();
  Batch batch;
  batch.dim = view.dim;
  batch.features.reserve(batch_size * view.dim);
  batch.labels.reserve(batch_size);
  for (std::size_t b = 0; b < batch_size; ++b) {
    const auto i = static_cast<std::size_t>(stream.uniform_int(0, view.rows() - 1));
    const auto row = view.row(i);
    batch.features.insert(batch.features.end(), row.begin(), row.end());
    batch.labels.push_back(view.labels[i]);
  }
  return batch;
}

std::size_t median_client_steps(std::size_t median_samples, std::size_t batch_size) {
  if (batch_size < 1) throw DomainError("median_client_steps: batch size must be >= 1");
  return (median_samples + batch_size - 1) / batch_size;
}

std::size_t median_client_steps(const FederatedDataset& dataset, std::size_t batch_size) {
  return median_client_steps(dataset.stats.median_client_samples, batch_size);
}

void export_dataset(const FederatedDataset& dataset, const std::filesystem::path& stem,
                    const std::string& metadata_json) {
  validate(dataset);
  auto csv_path = stem;
  csv_path += ".csv";
  auto json_path = stem;
  json_path += ".json";
  if (stem.has_parent_path()) std::filesystem::create_directories(stem.parent_path());

  std::ofstream csv(csv_path, std::ios::binary);
  if (!csv) throw IoError("cannot write " + csv_path.string());
  std::string line = "client_id,split,sample_id,label";
  for (std::size_t j = 0; j < dataset.feature_dim; ++j) line += ",x" + std::to_string(j);
  csv << line << '\n';
  for (const auto& shard : dataset.shards) {
    for (const auto& [split, samples] : {std::pair{"train", &shard.train}, std::pair{"test", &shard.test}}) {
      const auto view = samples->view();
      for (std::size_t i = 0; i < view.rows(); ++i) {
        line.clear();
        line += std::to_string(shard.client_id);
        line += ',';
        line += split;
        line += ',';
        line += std::to_string(samples->ids[i]);
        line += ',';
        line += std::to_string(view.labels[i]);
        for (double x : view.row(i)) {
          line += ',';
          append_double(line, x);
        }
        csv << line << '\n';
      }
    }
  }
  if (!csv) throw IoError("failed writing " + csv_path.string());

  nlohmann::json sidecar;
  sidecar["format"] = "gel-dataset-v1";
  sidecar["feature_dim"] = dataset.feature_dim;
  sidecar["classes"] = dataset.classes;
  sidecar["test_fraction"] = dataset.test_fraction;
  sidecar["stats"] = {{"clients", dataset.stats.clients},
                      {"total_samples", dataset.stats.total_samples},
                      {"median_client_samples", dataset.stats.median_client_samples}};
  sidecar["metadata"] = nlohmann::json::parse(metadata_json);
  std::ofstream js(json_path);
  if (!js) throw IoError("cannot write " + json_path.string());
  js << sidecar.dump(2) << '\n';
}

FederatedDataset import_dataset(const std::filesystem::path& stem) {
  auto csv_path = stem;
  csv_path += ".csv";
  auto json_path = stem;
  json_path += ".json";

  std::ifstream js(json_path);
  if (!js) throw IoError("cannot read " + json_path.string());
  nlohmann::json sidecar;
  try {
    js >> sidecar;
  } catch (const nlohmann::json::exception& e) {
    throw IoError(json_path.string() + ": " + e.what());
  }

  FederatedDataset out;
  try {
    out.feature_dim = sidecar.at("feature_dim").get<std::size_t>();
    out.classes = sidecar.at("classes").get<std::size_t>();
    out.test_fraction = sidecar.at("test_fraction").get<double>();
    const auto& stats = sidecar.at("stats");
    out.stats.clients = stats.at("clients").get<std::size_t>();
    out.stats.total_samples = stats.at("total_samples").get<std::size_t>();
    out.stats.median_client_samples = stats.at("median_client_samples").get<std::size_t>();
  } catch (const nlohmann::json::exception& e) {
    throw IoError(json_path.string() + ": " + e.what());
  }

  std::ifstream csv(csv_path, std::ios::binary);
  if (!csv) throw IoError("cannot read " + csv_path.string());
  std::string line;
  std::getline(csv, line);  // header
  out.shards.resize(out.stats.clients);
  for (std::size_t k = 0; k < out.shards.size(); ++k) {
    out.shards[k].client_id = k;
    out.shards[k].train.dim = out.feature_dim;
    out.shards[k].test.dim = out.feature_dim;
  }

  std::vector<double> x(out.feature_dim);
  std::size_t line_no = 1;
  while (std::getline(csv, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::vector<std::string_view> fields;
    std::string_view rest(line);
    while (true) {
      const auto comma = rest.find(',');
      fields.push_back(rest.substr(0, comma));
      if (comma == std::string_view::npos) break;
      rest.remove_prefix(comma + 1);
    }
    if (fields.size() != 4 + out.feature_dim) {
      throw IoError("dataset csv line " + std::to_string(line_no) + ": wrong field count");
    }
    const auto client = parse_number<std::size_t>(fields[0], line_no);
    if (client >= out.shards.size()) {
      throw IoError("dataset csv line " + std::to_string(line_no) + ": client id out of range");
    }
    Samples* dst = nullptr;
    if (fields[1] == "train") {
      dst = &out.shards[client].train;
    } else if (fields[1] == "test") {
      dst = &out.shards[client].test;
    } else {
      throw IoError("dataset csv line " + std::to_string(line_no) + ": unknown split");
    }
    const auto id = parse_number<std::uint64_t>(fields[2], line_no);
    const auto label = parse_number<int>(fields[3], line_no);
    for (std::size_t j = 0; j < out.feature_dim; ++j) x[j] = parse_number<double>(fields[4 + j], line_no);
    dst->push_back(x, label, id);
  }
  try {
    validate(out);
  } catch (const std::exception& e) {
    throw IoError(stem.string() + ": " + e.what());
  }
  return out;
}

}  // namespace gel
