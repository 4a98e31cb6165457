#include "fedfm/topology.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "fedfm/errors.hpp"
#include "fedfm/io.hpp"
#include "fedfm/rng.hpp"

namespace fedfm::topology {

void ClippedNormal::validate(const char* what) const {
  if (!(mean > 0.0) || !std::isfinite(mean)) {
    throw ConfigError(std::string(what) + ": mean must be positive");
  }
  if (!(std >= 0.0) || !std::isfinite(std)) {
    throw ConfigError(std::string(what) + ": std must be non-negative");
  }
  if (!(floor > 0.0) || !std::isfinite(floor)) {
    throw ConfigError(std::string(what) + ": floor must be positive");
  }
}

void EcosystemSpec::validate() const {
  if (K == 0) throw ConfigError("ecosystem: K must be positive");
  power.validate("ecosystem.power");
  bandwidth.validate("ecosystem.bandwidth");
}

std::vector<WorkerNode> build_ecosystem(const std::shared_ptr<const data::Dataset>& dataset,
                                        const EcosystemSpec& spec) {
  spec.validate();
  auto shards = data::partition(dataset, spec.K, spec.partition);

  Rng power_rng(derive_seed(spec.seed, "power"));
  Rng bandwidth_rng(derive_seed(spec.seed, "bandwidth"));
  std::vector<WorkerNode> nodes;
  nodes.reserve(spec.K);
  for (std::size_t k = 0; k < spec.K; ++k) {
    WorkerNode node;
    node.id = static_cast<int>(k);
    node.shard = std::move(shards[k]);
    node.power = std::max(power_rng.normal(spec.power.mean, spec.power.std), spec.power.floor);
    node.bandwidth =
        std::max(bandwidth_rng.normal(spec.bandwidth.mean, spec.bandwidth.std), spec.bandwidth.floor);
    nodes.push_back(std::move(node));
  }
  return nodes;
}

void write_ecosystem_csv(std::span<const WorkerNode> nodes, const std::filesystem::path& path) {
  auto out = io::open_output(path);
  out << "id,V,P,B\n";
  for (const auto& n : nodes) {
    out << n.id << ',' << n.volume() << ',' << io::format_real(n.power) << ','
        << io::format_real(n.bandwidth) << '\n';
  }
  if (!out) throw IoError("write failed: " + path.string());
}

}  // namespace fedfm::topology
