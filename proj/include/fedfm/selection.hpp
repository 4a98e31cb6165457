#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <set>
#include <span>
#include <string_view>
#include <vector>

#include "fedfm/topology.hpp"

namespace fedfm::selection {

// Model-specific constants of the Selection Score, both in bytes.
struct ScoreParams {
  double alpha = 1.0;  // model output size
  double kappa = 1.0;  // model memory requirement

  void validate() const;
};

enum class StrategyKind { s_based, random, top_volume, top_power, top_bandwidth };

StrategyKind parse_strategy(std::string_view name);
std::string_view to_string(StrategyKind kind);

struct SelectionStrategy {
  StrategyKind kind = StrategyKind::s_based;
  std::uint64_t seed = 0;  // random only
};

struct SelectionOutcome {
  std::vector<int> eta;          // selected ids, best rank first
  std::vector<int> ranking;      // every eligible candidate in rank order
  std::map<int, double> scores;  // S for every scorable candidate
  std::size_t m = 0;
  double fraction = 1.0;
};

// S = (alpha / B + kappa * V / P) * (1 / V). Higher S ranks first.
// Throws ScoreUndefinedError when V == 0.
double selection_score(const topology::WorkerNode& node, const ScoreParams& p);

// m = max(floor(W * n), 1), n > 0.
std::size_t selection_count(double fraction, std::size_t n);

// Candidates in rank order under `strategy`; ties go to the lower id.
// `eligible[i]` gates nodes[i]. Zero-volume nodes rank last under s-based.
std::vector<int> rank_candidates(std::span<const topology::WorkerNode> nodes,
                                 const std::vector<bool>& eligible, const SelectionStrategy& strategy,
                                 const ScoreParams& p);

// Top min(m, |eligible|) candidates.
SelectionOutcome select_count(std::span<const topology::WorkerNode> nodes,
                              const std::vector<bool>& eligible, std::size_t m, double fraction,
                              const SelectionStrategy& strategy, const ScoreParams& p);

// Alive nodes only; m = max(floor(W * |alive|), 1).
// Throws EmptyEcosystemError if nothing is alive.
SelectionOutcome select_top(std::span<const topology::WorkerNode> nodes, double fraction,
                            const SelectionStrategy& strategy, const ScoreParams& p);

// Up to `count` best-ranked alive nodes not in `exclude`.
std::vector<int> select_replacements(std::span<const topology::WorkerNode> nodes,
                                     const std::set<int>& exclude, std::size_t count,
                                     const SelectionStrategy& strategy, const ScoreParams& p);

// round,node_id,score,rank,selected with one row per ranked candidate;
// rank is 1-based and score is empty for unscorable nodes.
class SelectionCsv {
 public:
  explicit SelectionCsv(const std::filesystem::path& path);
  void append(int round, const SelectionOutcome& outcome);
  void close();

 private:
  std::filesystem::path path_;
  std::string buffer_;
};

}  // namespace fedfm::selection
