#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <span>
#include <vector>

#include "fedfm/dataset.hpp"

namespace fedfm::topology {

// Units: V in samples, P in operations/second, B in bytes/second.
struct WorkerNode {
  int id = 0;
  data::DataShard shard;
  double power = 1.0;
  double bandwidth = 1.0;
  bool alive = true;

  std::size_t volume() const noexcept { return shard.n_k(); }
};

// Normal(mean, std) with draws clipped below at `floor`.
struct ClippedNormal {
  double mean = 1.0;
  double std = 0.0;
  double floor = 1e-9;

  void validate(const char* what) const;
  friend bool operator==(const ClippedNormal&, const ClippedNormal&) = default;
};

struct EcosystemSpec {
  std::size_t K = 1;
  ClippedNormal power;
  ClippedNormal bandwidth;
  data::PartitionSpec partition;
  std::uint64_t seed = 0;

  void validate() const;
};

// Nodes are returned in id order 0..K-1, all alive.
std::vector<WorkerNode> build_ecosystem(const std::shared_ptr<const data::Dataset>& dataset,
                                        const EcosystemSpec& spec);

// id,V,P,B
void write_ecosystem_csv(std::span<const WorkerNode> nodes, const std::filesystem::path& path);

}  // namespace fedfm::topology
