#pragma once

#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include "fedfm/dataset.hpp"
#include "fedfm/io.hpp"
#include "fedfm/rng.hpp"
#include "fedfm/topology.hpp"

namespace support {

inline std::filesystem::path scratch(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("fedfm-unit-" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

// A dataset of n one-feature samples, labels cycling through n_classes.
inline std::shared_ptr<const fedfm::data::Dataset> counting_dataset(std::size_t n, int n_classes = 2) {
  auto d = std::make_shared<fedfm::data::Dataset>(n_classes, 1);
  for (std::size_t i = 0; i < n; ++i) {
    const double x = static_cast<double>(i) / static_cast<double>(n);
    d->add(std::span<const double>(&x, 1), static_cast<int>(i % static_cast<std::size_t>(n_classes)));
  }
  return d;
}

inline fedfm::topology::WorkerNode node(int id, std::size_t V, double P, double B,
                                        const std::shared_ptr<const fedfm::data::Dataset>& source) {
  fedfm::topology::WorkerNode n;
  n.id = id;
  n.power = P;
  n.bandwidth = B;
  n.shard.owner = id;
  n.shard.source = source;
  for (std::size_t i = 0; i < V; ++i) n.shard.indices.push_back(i % source->size());
  return n;
}

inline std::string slurp(const std::filesystem::path& p) { return fedfm::io::read_file(p); }

}  // namespace support
