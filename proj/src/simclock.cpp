#include "fedfm/simclock.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "fedfm/errors.hpp"

namespace fedfm::simclock {

SimTime::SimTime(double seconds) : seconds_(seconds) {
  if (!std::isfinite(seconds) || seconds < 0.0) {
    throw ConfigError("SimTime must be finite and non-negative, got " + std::to_string(seconds));
  }
}

SimTime& SimTime::operator+=(SimTime other) {
  seconds_ += other.seconds_;
  return *this;
}

void TimingModel::validate() const {
  if (!(compute_cost_per_sample_epoch > 0.0) || !(model_bytes > 0.0) || !(timeout.seconds() > 0.0)) {
    throw ConfigError("timing: cost, model bytes and timeout must be positive");
  }
}

SimTime node_round_time(const topology::WorkerNode& node, const TimingModel& tm,
                        const learner::TrainConfig& cfg) {
  const double compute = static_cast<double>(cfg.local_epochs) * tm.compute_cost_per_sample_epoch *
                         static_cast<double>(node.volume()) / node.power;
  const double transmit = tm.model_bytes / node.bandwidth;
  return SimTime(compute + transmit);
}

namespace {
SimTime max_of(std::span<const SimTime> times) {
  SimTime best;
  for (auto t : times) best = std::max(best, t);
  return best;
}
}  // namespace

SimTime round_duration(std::span<const SimTime> primary, bool failed_any, SimTime timeout,
                       std::span<const SimTime> replacement) {
  const SimTime responders = max_of(primary);
  if (!failed_any) return responders;
  return std::max(responders, timeout + max_of(replacement));
}

SimTime percentile_round_time(std::span<const topology::WorkerNode> nodes, const TimingModel& tm,
                              const learner::TrainConfig& cfg, double q) {
  if (!(q > 0.0) || q > 1.0) throw ConfigError("timing: percentile must be in (0, 1]");
  std::vector<double> times;
  for (const auto& n : nodes) {
    if (n.volume() > 0) times.push_back(node_round_time(n, tm, cfg).seconds());
  }
  if (times.empty()) throw EmptyEcosystemError("timing: no node holds data");
  std::sort(times.begin(), times.end());
  auto rank = static_cast<std::size_t>(std::ceil(q * static_cast<double>(times.size()) - 1e-9));
  rank = std::clamp<std::size_t>(rank, 1, times.size());
  return SimTime(times[rank - 1]);
}

}  // namespace fedfm::simclock
