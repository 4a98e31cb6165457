#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <set>
#include <span>
#include <string_view>

#include "fedfm/topology.hpp"

namespace fedfm::faults {

enum class FailureMode { permanent, transient_one_round };

FailureMode parse_mode(std::string_view name);
std::string_view to_string(FailureMode mode);

// Crash/disconnect faults only: a failed node never answers.
struct FailureSchedule {
  std::map<int, std::set<int>> entries;  // round -> node ids
  FailureMode mode = FailureMode::permanent;
  double fraction = 0.0;
  std::uint64_t seed = 0;

  bool empty() const noexcept;
  std::size_t size() const noexcept;
  // Adds `other`'s entries; modes must agree.
  void merge(const FailureSchedule& other);

  friend bool operator==(const FailureSchedule& a, const FailureSchedule& b) {
    return a.entries == b.entries && a.mode == b.mode;
  }
};

// floor(f * |eta|) distinct members of eta, uniformly drawn, all at `round`.
FailureSchedule plan_failures(std::span<const int> eta, double fraction, int round,
                              std::uint64_t seed, FailureMode mode = FailureMode::permanent);

// Brings back transient failures from earlier rounds.
void restore_recovered(std::span<topology::WorkerNode> nodes, const FailureSchedule& schedule,
                       int round);

// restore_recovered, then takes down everything scheduled at `round`. Nodes
// the schedule does not mention are left untouched.
void apply_failures(std::span<topology::WorkerNode> nodes, const FailureSchedule& schedule, int round);

// round,node_id,mode
void write_schedule_csv(const FailureSchedule& schedule, const std::filesystem::path& path);
FailureSchedule read_schedule_csv(const std::filesystem::path& path);

}  // namespace fedfm::faults
