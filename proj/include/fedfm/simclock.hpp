#pragma once

#include <compare>
#include <span>

#include "fedfm/learner.hpp"
#include "fedfm/topology.hpp"

namespace fedfm::simclock {

// Simulated wall-clock seconds; finite and non-negative.
class SimTime {
 public:
  constexpr SimTime() = default;
  explicit SimTime(double seconds);

  constexpr double seconds() const noexcept { return seconds_; }

  SimTime& operator+=(SimTime other);
  friend SimTime operator+(SimTime a, SimTime b) { return a += b; }
  friend constexpr auto operator<=>(SimTime, SimTime) = default;

 private:
  double seconds_ = 0.0;
};

struct TimingModel {
  double compute_cost_per_sample_epoch = 1.0;  // operations
  double model_bytes = 1.0;                    // bytes sent back per update
  SimTime timeout{1.0};                        // T

  void validate() const;
};

// E * cost * V / P + model_bytes / B
SimTime node_round_time(const topology::WorkerNode& node, const TimingModel& tm,
                        const learner::TrainConfig& cfg);

// Without failures: the slowest primary responder. With failures the
// replacement phase starts once T has expired:
// max(max(primary), T + max(replacement)). The max of an empty list is 0.
SimTime round_duration(std::span<const SimTime> primary, bool failed_any, SimTime timeout,
                       std::span<const SimTime> replacement);

// Nearest-rank percentile (q in (0, 1]) of node_round_time over non-empty nodes.
SimTime percentile_round_time(std::span<const topology::WorkerNode> nodes, const TimingModel& tm,
                              const learner::TrainConfig& cfg, double q);

}  // namespace fedfm::simclock
