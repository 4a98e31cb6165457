#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <span>
#include <string_view>
#include <vector>

namespace fedfm::data {

// Non-owning view of one sample stored inside a Dataset.
struct Sample {
  std::span<const double> features;
  int label;
};

// Row-major feature storage; features are normalized to [0, 1].
class Dataset {
 public:
  Dataset(int n_classes, int dim);

  void add(std::span<const double> features, int label);
  void reserve(std::size_t n);

  std::size_t size() const noexcept { return labels_.size(); }
  bool empty() const noexcept { return labels_.empty(); }
  int n_classes() const noexcept { return n_classes_; }
  int dim() const noexcept { return dim_; }

  Sample operator[](std::size_t i) const {
    return {std::span<const double>(features_).subspan(i * static_cast<std::size_t>(dim_),
                                                        static_cast<std::size_t>(dim_)),
            labels_[i]};
  }
  int label(std::size_t i) const { return labels_[i]; }
  const std::vector<int>& labels() const noexcept { return labels_; }

  // Byte-level equality of the stored features and labels.
  friend bool operator==(const Dataset&, const Dataset&) = default;

 private:
  int n_classes_;
  int dim_;
  std::vector<double> features_;
  std::vector<int> labels_;
};

// A node's local data: indices into a shared source dataset.
struct DataShard {
  int owner = 0;
  std::shared_ptr<const Dataset> source;
  std::vector<std::size_t> indices;

  std::size_t n_k() const noexcept { return indices.size(); }
  bool empty() const noexcept { return indices.empty(); }
  Sample operator[](std::size_t i) const { return (*source)[indices[i]]; }
};

enum class PartitionKind { uniform_iid, normal_volume_iid, exclusive_class };

PartitionKind parse_partition_kind(std::string_view name);
std::string_view to_string(PartitionKind kind);

struct PartitionSpec {
  PartitionKind kind = PartitionKind::uniform_iid;
  double mu_frac = 0.0;     // mean volume fraction (normal-volume-iid)
  double sigma_frac = 0.0;  // std-dev of the volume fraction
  std::map<int, std::vector<int>> exclusive_map;  // class -> owning node ids
  std::uint64_t seed = 0;
};

// Reads an IDX image file (magic 0x00000803) and label file (0x00000801).
Dataset load_idx(const std::filesystem::path& images_path,
                 const std::filesystem::path& labels_path);

// Class c is an isotropic Gaussian of std-dev `spread` around a seeded center.
Dataset synth_blobs(int n_classes, int n_per_class, int dim, double spread, std::uint64_t seed);

struct TrainTestSplit {
  Dataset train;
  Dataset test;
};

// Stratified and order-preserving: within every class the first
// (1 - test_fraction) share of samples goes to train.
TrainTestSplit train_test_split(const Dataset& dataset, double test_fraction);

// Returns the first `limit` samples (all when limit == 0 or limit >= size).
Dataset take_prefix(const Dataset& dataset, std::size_t limit);

// Per-node target volumes; sums to `total`, every entry >= 1.
std::vector<std::size_t> target_volumes(std::size_t total, std::size_t K, const PartitionSpec& spec);

std::vector<DataShard> partition(const std::shared_ptr<const Dataset>& dataset, std::size_t K,
                                 const PartitionSpec& spec);

// node_id,sample_index,label
void write_shards_csv(std::span<const DataShard> shards, const std::filesystem::path& path);

}  // namespace fedfm::data
