#include "fedfm/faults.hpp"

#include <algorithm>
#include <string>
#include <vector>

#include "fedfm/errors.hpp"
#include "fedfm/io.hpp"
#include "fedfm/rng.hpp"

namespace fedfm::faults {

FailureMode parse_mode(std::string_view name) {
  if (name == "permanent") return FailureMode::permanent;
  if (name == "transient-one-round") return FailureMode::transient_one_round;
  throw ConfigError("unknown failure mode '" + std::string(name) + "'");
}

std::string_view to_string(FailureMode mode) {
  return mode == FailureMode::permanent ? "permanent" : "transient-one-round";
}

bool FailureSchedule::empty() const noexcept { return size() == 0; }

std::size_t FailureSchedule::size() const noexcept {
  std::size_t n = 0;
  for (const auto& [round, ids] : entries) n += ids.size();
  return n;
}

void FailureSchedule::merge(const FailureSchedule& other) {
  if (other.empty()) return;
  if (!empty() && other.mode != mode) throw ConfigError("cannot merge schedules with different modes");
  if (empty()) mode = other.mode;
  for (const auto& [round, ids] : other.entries) entries[round].insert(ids.begin(), ids.end());
}

FailureSchedule plan_failures(std::span<const int> eta, double fraction, int round,
                              std::uint64_t seed, FailureMode mode) {
  if (fraction < 0.0 || fraction > 1.0) throw ConfigError("failures: fraction must be in [0, 1]");
  FailureSchedule schedule;
  schedule.mode = mode;
  schedule.fraction = fraction;
  schedule.seed = seed;
  const std::size_t count = floor_fraction(fraction, eta.size());
  if (count == 0) return schedule;

  std::vector<int> pool(eta.begin(), eta.end());
  Rng rng(derive_seed(seed, "plan-failures", static_cast<std::uint64_t>(round)));
  rng.shuffle(std::span<int>(pool));
  schedule.entries[round].insert(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(count));
  return schedule;
}

void restore_recovered(std::span<topology::WorkerNode> nodes, const FailureSchedule& schedule,
                       int round) {
  if (schedule.mode != FailureMode::transient_one_round) return;
  for (const auto& [when, ids] : schedule.entries) {
    if (when >= round) break;
    for (auto& n : nodes) {
      if (ids.contains(n.id)) n.alive = true;
    }
  }
}

void apply_failures(std::span<topology::WorkerNode> nodes, const FailureSchedule& schedule, int round) {
  restore_recovered(nodes, schedule, round);
  for (const auto& [when, ids] : schedule.entries) {
    const bool active = schedule.mode == FailureMode::permanent ? when <= round : when == round;
    if (!active) continue;
    for (auto& n : nodes) {
      if (ids.contains(n.id)) n.alive = false;
    }
  }
}

void write_schedule_csv(const FailureSchedule& schedule, const std::filesystem::path& path) {
  auto out = io::open_output(path);
  out << "round,node_id,mode\n";
  for (const auto& [round, ids] : schedule.entries) {
    for (int id : ids) out << round << ',' << id << ',' << to_string(schedule.mode) << '\n';
  }
  if (!out) throw IoError("write failed: " + path.string());
}

FailureSchedule read_schedule_csv(const std::filesystem::path& path) {
  const std::string text = io::read_file(path);
  const auto lines = io::split(text, '\n');
  if (lines.empty() || lines[0] != "round,node_id,mode") {
    throw FormatError(path.string() + ": missing schedule header");
  }
  FailureSchedule schedule;
  bool have_mode = false;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    if (lines[i].empty()) continue;
    const auto fields = io::split(lines[i], ',');
    if (fields.size() != 3) throw FormatError(path.string() + ": bad row " + std::to_string(i + 1));
    const auto mode = parse_mode(fields[2]);
    if (have_mode && mode != schedule.mode) {
      throw FormatError(path.string() + ": mixed failure modes");
    }
    schedule.mode = mode;
    have_mode = true;
    schedule.entries[static_cast<int>(io::parse_int(fields[0]))].insert(
        static_cast<int>(io::parse_int(fields[1])));
  }
  return schedule;
}

}  // namespace fedfm::faults
