#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "fedfm/aggregator.hpp"
#include "fedfm/topology.hpp"

namespace fedfm::cli {

struct DatasetConfig {
  std::string source = "blobs";  // blobs | idx
  int n_classes = 10;
  int n_per_class = 1000;
  int dim = 16;
  double spread = 0.22;
  double test_fraction = 0.2;  // blobs only
  std::string train_images, train_labels, test_images, test_labels;
  std::size_t train_limit = 0;  // 0 keeps everything
  std::size_t test_limit = 0;

  friend bool operator==(const DatasetConfig&, const DatasetConfig&) = default;
};

struct EcosystemConfig {
  std::size_t K = 50;
  topology::ClippedNormal power{1e6, 0.0, 1e3};
  topology::ClippedNormal bandwidth{1e4, 0.0, 10.0};
  std::string partition = "uniform-iid";
  double mu_frac = 0.02;
  double sigma_frac = 0.0;
  std::map<int, std::vector<int>> exclusive_map;
  // "class-round-robin" maps class c to every node with id % n_classes == c.
  std::string exclusive_layout;

  friend bool operator==(const EcosystemConfig&, const EcosystemConfig&) = default;
};

struct ModelConfig {
  std::vector<std::size_t> hidden{32};
  std::string activation = "relu";

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

struct TrainSection {
  double learning_rate = 0.05;
  int local_epochs = 1;
  int batch_size = 32;

  friend bool operator==(const TrainSection&, const TrainSection&) = default;
};

// Unset values come from the model (alpha, kappa) or the ecosystem (timeout).
struct ScoreSection {
  std::optional<double> alpha, kappa;
  friend bool operator==(const ScoreSection&, const ScoreSection&) = default;
};

struct SelectionSection {
  double fraction = 0.7;
  std::string strategy = "s-based";
  friend bool operator==(const SelectionSection&, const SelectionSection&) = default;
};

struct TimingSection {
  std::optional<double> compute_cost_per_sample_epoch;
  std::optional<double> model_bytes;
  std::optional<double> timeout_s;
  double timeout_percentile = 0.95;

  friend bool operator==(const TimingSection&, const TimingSection&) = default;
};

struct FailureSection {
  double fraction = 0.0;
  int round = 2;
  std::string mode = "permanent";

  friend bool operator==(const FailureSection&, const FailureSection&) = default;
};

struct SweepSection {
  std::vector<double> fractions{0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0};
  std::vector<std::string> strategies{"s-based", "random", "top-volume", "top-power", "top-bandwidth"};
  std::vector<double> failure_fractions{0.0, 0.2, 0.4, 0.6};
  std::vector<int> contributing{10, 30, 50};
  std::size_t eta2_K = 100;  // K of the failure scenario
  int exclusive_classes = 1;
  std::vector<double> mitigation_fractions{0.2, 0.4, 0.6};

  friend bool operator==(const SweepSection&, const SweepSection&) = default;
};

struct ScenarioConfig {
  DatasetConfig dataset;
  EcosystemConfig ecosystem;
  ModelConfig model;
  TrainSection train;
  ScoreSection score;
  SelectionSection selection;
  aggregator::ConvergenceCriteria convergence;
  TimingSection timing;
  FailureSection failures;
  std::string algorithm = "fedfm";
  std::vector<std::uint64_t> seeds{1, 2, 3, 4, 5, 6, 7, 8, 9, 10};
  SweepSection sweep;
  bool audit = true;  // per-seed ecosystem/selection/schedule/shard files

  friend bool operator==(const ScenarioConfig&, const ScenarioConfig&) = default;
};

// Strict: unknown keys and wrong types raise ConfigError naming the field.
ScenarioConfig from_json(const nlohmann::json& doc);
nlohmann::json to_json(const ScenarioConfig& cfg);

// "a.b.c=value"; the value is read as JSON, or as a plain string if that fails.
void apply_override(nlohmann::json& doc, std::string_view assignment);

// Reads the file (or starts from defaults when `path` is empty), applies the
// overrides in order and validates.
ScenarioConfig load_config(const std::filesystem::path& path, const std::vector<std::string>& overrides);

void validate(const ScenarioConfig& cfg);

}  // namespace fedfm::cli
