#include "fedfm/selection.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "fedfm/errors.hpp"
#include "fedfm/io.hpp"
#include "fedfm/rng.hpp"

namespace fedfm::selection {

using topology::WorkerNode;

void ScoreParams::validate() const {
  if (!(alpha > 0.0) || !(kappa > 0.0)) throw ConfigError("score: alpha and kappa must be positive");
}

StrategyKind parse_strategy(std::string_view name) {
  if (name == "s-based") return StrategyKind::s_based;
  if (name == "random") return StrategyKind::random;
  if (name == "top-volume") return StrategyKind::top_volume;
  if (name == "top-power") return StrategyKind::top_power;
  if (name == "top-bandwidth") return StrategyKind::top_bandwidth;
  throw ConfigError("unknown selection strategy '" + std::string(name) + "'");
}

std::string_view to_string(StrategyKind kind) {
  switch (kind) {
    case StrategyKind::s_based: return "s-based";
    case StrategyKind::random: return "random";
    case StrategyKind::top_volume: return "top-volume";
    case StrategyKind::top_power: return "top-power";
    case StrategyKind::top_bandwidth: return "top-bandwidth";
  }
  return "?";
}

double selection_score(const WorkerNode& node, const ScoreParams& p) {
  const auto volume = static_cast<double>(node.volume());
  if (node.volume() == 0) {
    throw ScoreUndefinedError("node " + std::to_string(node.id) + " has no data; score undefined");
  }
  return (p.alpha / node.bandwidth + p.kappa * volume / node.power) * (1.0 / volume);
}

std::size_t selection_count(double fraction, std::size_t n) {
  return std::max<std::size_t>(floor_fraction(fraction, n), 1);
}

std::vector<int> rank_candidates(std::span<const WorkerNode> nodes, const std::vector<bool>& eligible,
                                 const SelectionStrategy& strategy, const ScoreParams& p) {
  if (eligible.size() != nodes.size()) throw ConfigError("rank_candidates: mask size mismatch");

  struct Entry {
    int id;
    bool scorable;
    double key;
  };
  std::vector<Entry> entries;
  entries.reserve(nodes.size());

  // Random keys are drawn for every node in list order so a node's key does
  // not depend on which others are eligible.
  std::vector<double> random_keys;
  if (strategy.kind == StrategyKind::random) {
    Rng rng(derive_seed(strategy.seed, "random-selection"));
    random_keys.resize(nodes.size());
    for (auto& k : random_keys) k = rng.uniform();
  }

  for (std::size_t i = 0; i < nodes.size(); ++i) {
    if (!eligible[i]) continue;
    const auto& n = nodes[i];
    switch (strategy.kind) {
      case StrategyKind::s_based:
        if (n.volume() == 0) {
          entries.push_back({n.id, false, 0.0});
        } else {
          entries.push_back({n.id, true, selection_score(n, p)});
        }
        break;
      case StrategyKind::random: entries.push_back({n.id, true, random_keys[i]}); break;
      case StrategyKind::top_volume: entries.push_back({n.id, true, double(n.volume())}); break;
      case StrategyKind::top_power: entries.push_back({n.id, true, n.power}); break;
      case StrategyKind::top_bandwidth: entries.push_back({n.id, true, n.bandwidth}); break;
    }
  }

  std::sort(entries.begin(), entries.end(), [](const Entry& a, const Entry& b) {
    if (a.scorable != b.scorable) return a.scorable;
    if (a.scorable && a.key != b.key) return a.key > b.key;
    return a.id < b.id;
  });
  std::vector<int> ranking;
  ranking.reserve(entries.size());
  for (const auto& e : entries) ranking.push_back(e.id);
  return ranking;
}

SelectionOutcome select_count(std::span<const WorkerNode> nodes, const std::vector<bool>& eligible,
                              std::size_t m, double fraction, const SelectionStrategy& strategy,
                              const ScoreParams& p) {
  SelectionOutcome out;
  out.fraction = fraction;
  out.ranking = rank_candidates(nodes, eligible, strategy, p);
  const std::size_t take = std::min(m, out.ranking.size());
  out.eta.assign(out.ranking.begin(), out.ranking.begin() + static_cast<std::ptrdiff_t>(take));
  out.m = take;
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    if (eligible[i] && nodes[i].volume() > 0) out.scores[nodes[i].id] = selection_score(nodes[i], p);
  }
  return out;
}

SelectionOutcome select_top(std::span<const WorkerNode> nodes, double fraction,
                            const SelectionStrategy& strategy, const ScoreParams& p) {
  if (!(fraction > 0.0) || fraction > 1.0) throw ConfigError("selection: W must be in (0, 1]");
  std::vector<bool> alive(nodes.size());
  std::size_t n_alive = 0;
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    alive[i] = nodes[i].alive;
    n_alive += nodes[i].alive ? 1 : 0;
  }
  if (n_alive == 0) throw EmptyEcosystemError("selection: no alive worker nodes");
  return select_count(nodes, alive, selection_count(fraction, n_alive), fraction, strategy, p);
}

std::vector<int> select_replacements(std::span<const WorkerNode> nodes, const std::set<int>& exclude,
                                     std::size_t count, const SelectionStrategy& strategy,
                                     const ScoreParams& p) {
  std::vector<bool> mask(nodes.size());
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    mask[i] = nodes[i].alive && !exclude.contains(nodes[i].id);
  }
  auto ranking = rank_candidates(nodes, mask, strategy, p);
  if (ranking.size() > count) ranking.resize(count);
  return ranking;
}

SelectionCsv::SelectionCsv(const std::filesystem::path& path) : path_(path) {
  buffer_ = "round,node_id,score,rank,selected\n";
}

void SelectionCsv::append(int round, const SelectionOutcome& outcome) {
  const std::set<int> chosen(outcome.eta.begin(), outcome.eta.end());
  for (std::size_t r = 0; r < outcome.ranking.size(); ++r) {
    const int id = outcome.ranking[r];
    buffer_ += std::to_string(round);
    buffer_ += ',';
    buffer_ += std::to_string(id);
    buffer_ += ',';
    if (auto it = outcome.scores.find(id); it != outcome.scores.end()) {
      buffer_ += io::format_real(it->second);
    }
    buffer_ += ',';
    buffer_ += std::to_string(r + 1);
    buffer_ += ',';
    buffer_ += chosen.contains(id) ? '1' : '0';
    buffer_ += '\n';
  }
}

void SelectionCsv::close() {
  auto out = io::open_output(path_);
  out << buffer_;
  if (!out) throw IoError("write failed: " + path_.string());
}

}  // namespace fedfm::selection
