#include "fedfm/aggregator.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <set>

#include "fedfm/errors.hpp"
#include "fedfm/io.hpp"
#include "fedfm/rng.hpp"

namespace fedfm::aggregator {

using learner::ModelWeights;
using simclock::SimTime;
using topology::WorkerNode;

Algorithm parse_algorithm(std::string_view name) {
  if (name == "fedfm") return Algorithm::fedfm;
  if (name == "fedavg-ignore") return Algorithm::fedavg_ignore;
  throw ConfigError("unknown algorithm '" + std::string(name) + "'");
}

std::string_view to_string(Algorithm a) { return a == Algorithm::fedfm ? "fedfm" : "fedavg-ignore"; }

std::string_view to_string(ConvergenceReason r) {
  switch (r) {
    case ConvergenceReason::threshold_stable: return "threshold-stable";
    case ConvergenceReason::plateau_high_loss: return "plateau-high-loss";
    case ConvergenceReason::max_rounds: return "max-rounds";
  }
  return "?";
}

ModelWeights fedavg_aggregate(std::span<const ClientModel> updates) {
  if (updates.empty()) throw NoRespondersError("fedavg_aggregate: no updates to average");
  const auto& first = updates.front().weights;
  std::size_t n = 0;
  for (const auto& u : updates) {
    if (u.weights.spec != first.spec || u.weights.values.size() != first.values.size()) {
      throw AggregationError("fedavg_aggregate: updates have different shapes");
    }
    n += u.n_k;
  }
  if (n == 0) throw AggregationError("fedavg_aggregate: total sample count is zero");

  ModelWeights out{first.spec, std::vector<double>(first.values.size(), 0.0)};
  for (const auto& u : updates) {
    const double weight = static_cast<double>(u.n_k) / static_cast<double>(n);
    for (std::size_t i = 0; i < out.values.size(); ++i) out.values[i] += weight * u.weights.values[i];
  }
  return out;
}

void ConvergenceCriteria::validate() const {
  if (!(loss_threshold > 0.0)) throw ConfigError("convergence: loss_threshold must be positive");
  if (stability_window < 2) throw ConfigError("convergence: stability_window must be >= 2");
  if (!(stability_epsilon > 0.0)) throw ConfigError("convergence: stability_epsilon must be positive");
  if (max_rounds <= 0) throw ConfigError("convergence: max_rounds must be positive");
}

std::optional<ConvergenceHit> detect_convergence(std::span<const double> losses,
                                                 const ConvergenceCriteria& crit) {
  const auto window = static_cast<std::size_t>(crit.stability_window);
  const std::size_t limit = std::min(losses.size(), static_cast<std::size_t>(crit.max_rounds));
  for (std::size_t r = window; r <= limit; ++r) {
    const auto tail = losses.subspan(r - window, window);
    const auto [lo, hi] = std::minmax_element(tail.begin(), tail.end());
    if (*hi - *lo <= crit.stability_epsilon) {
      const auto reason = *hi <= crit.loss_threshold ? ConvergenceReason::threshold_stable
                                                     : ConvergenceReason::plateau_high_loss;
      return ConvergenceHit{static_cast<int>(r), reason};
    }
  }
  return std::nullopt;
}

void RoundConfig::validate() const {
  train.validate();
  timing.validate();
  score.validate();
  if (!(fraction > 0.0) || fraction > 1.0) throw ConfigError("selection: W must be in (0, 1]");
}

RoundState initial_state(ModelWeights w0) {
  RoundState s;
  s.omega_next = std::move(w0);
  return s;
}

std::size_t round_quota(const RoundConfig& cfg, std::size_t K) {
  return selection::selection_count(cfg.fraction, K);
}

namespace {

selection::SelectionStrategy round_strategy(const RoundConfig& cfg, int round) {
  auto s = cfg.strategy;
  s.seed = derive_seed(cfg.strategy.seed, "round", static_cast<std::uint64_t>(round));
  return s;
}

learner::TrainConfig client_config(const RoundConfig& cfg, int round, int id) {
  auto c = cfg.train;
  c.seed = derive_seed(cfg.train.seed, "client",
                       (static_cast<std::uint64_t>(round) << 32) | static_cast<std::uint32_t>(id));
  return c;
}

}  // namespace

selection::SelectionOutcome select_round(Algorithm algorithm, std::span<const WorkerNode> nodes,
                                         const RoundConfig& cfg, int round) {
  std::vector<bool> eligible(nodes.size(), true);
  if (algorithm == Algorithm::fedfm) {
    for (std::size_t i = 0; i < nodes.size(); ++i) eligible[i] = nodes[i].alive;
  }
  if (std::none_of(eligible.begin(), eligible.end(), [](bool b) { return b; })) {
    throw RoundFailedError(round, "no alive worker nodes to select");
  }
  return selection::select_count(nodes, eligible, round_quota(cfg, nodes.size()), cfg.fraction,
                                 round_strategy(cfg, round), cfg.score);
}

RoundState run_round(Algorithm algorithm, const RoundState& prev, std::span<WorkerNode> nodes,
                     const RoundConfig& cfg, const faults::FailureSchedule& schedule) {
  cfg.validate();
  RoundState st;
  st.t = prev.t + 1;
  st.omega_t = prev.omega_next;

  faults::restore_recovered(nodes, schedule, st.t);
  st.eta = select_round(algorithm, nodes, cfg, st.t);
  faults::apply_failures(nodes, schedule, st.t);

  std::map<int, std::size_t> index;
  for (std::size_t i = 0; i < nodes.size(); ++i) index[nodes[i].id] = i;
  const std::uint64_t dispatched_hash = st.omega_t.hash();
  const SimTime timeout = cfg.timing.timeout;

  std::vector<SimTime> primary_times;
  std::vector<SimTime> replacement_times;

  // Returns false if the node never answers.
  auto dispatch = [&](int id, bool replacement, std::vector<SimTime>& times) {
    const auto& node = nodes[index.at(id)];
    if (!node.alive) return false;
    if (node.shard.empty()) {
      st.empty.push_back(id);
      return true;
    }
    auto update = learner::client_update(st.omega_t, node.shard, client_config(cfg, st.t, id));
    const SimTime time = simclock::node_round_time(node, cfg.timing, cfg.train);
    times.push_back(time);
    st.responders.push_back({id, update.n_samples, std::move(update.weights), update.train_loss,
                             dispatched_hash, replacement, time});
    return true;
  };

  for (int id : st.eta.eta) {
    if (!dispatch(id, false, primary_times)) st.failed.push_back(id);
  }

  const std::size_t m = round_quota(cfg, nodes.size());
  if (algorithm == Algorithm::fedfm && !st.failed.empty() && m > 1) {
    const std::set<int> exclude(st.eta.eta.begin(), st.eta.eta.end());
    st.replacements = selection::select_replacements(nodes, exclude, st.failed.size(),
                                                     round_strategy(cfg, st.t), cfg.score);
    for (int id : st.replacements) {
      // No second wave: a silent replacement only costs another T.
      if (!dispatch(id, true, replacement_times)) replacement_times.push_back(timeout);
    }
  }

  if (st.responders.empty()) {
    throw RoundFailedError(st.t, std::to_string(st.failed.size()) + " of " +
                                     std::to_string(st.eta.eta.size()) +
                                     " selected nodes failed and no update arrived");
  }

  std::sort(st.responders.begin(), st.responders.end(),
            [](const Responder& a, const Responder& b) { return a.id < b.id; });

  std::vector<ClientModel> models;
  models.reserve(st.responders.size());
  double loss_sum = 0.0;
  std::size_t n_total = 0;
  for (const auto& r : st.responders) {
    models.push_back({r.n_k, r.weights});
    loss_sum += static_cast<double>(r.n_k) * r.train_loss;
    n_total += r.n_k;
  }
  st.omega_next = fedavg_aggregate(models);
  st.weighted_loss = loss_sum / static_cast<double>(n_total);
  st.duration = simclock::round_duration(primary_times, !st.failed.empty(), timeout, replacement_times);
  return st;
}

RoundState run_round_fedfm(const RoundState& prev, std::span<WorkerNode> nodes, const RoundConfig& cfg,
                           const faults::FailureSchedule& schedule) {
  return run_round(Algorithm::fedfm, prev, nodes, cfg, schedule);
}

RoundState run_round_fedavg_ignore(const RoundState& prev, std::span<WorkerNode> nodes,
                                   const RoundConfig& cfg, const faults::FailureSchedule& schedule) {
  return run_round(Algorithm::fedavg_ignore, prev, nodes, cfg, schedule);
}

ExperimentResult run_experiment(const Scenario& sc) {
  sc.round.validate();
  sc.convergence.validate();
  if (!sc.test || sc.test->empty()) throw ConfigError("experiment: empty test set");
  if (sc.nodes.empty()) throw EmptyEcosystemError("experiment: no worker nodes");

  std::vector<WorkerNode> nodes = sc.nodes;
  faults::FailureSchedule schedule = sc.schedule.value_or(faults::FailureSchedule{});
  if (!sc.schedule) {
    schedule.mode = sc.failures.mode;
    schedule.fraction = sc.failures.fraction;
    schedule.seed = sc.failures.seed;
  }

  ExperimentResult result;
  result.algorithm = sc.algorithm;
  RoundState state = initial_state(sc.initial);
  std::vector<double> losses;
  SimTime cumulative;
  learner::Evaluation eval = learner::evaluate(sc.initial, *sc.test);

  for (int t = 1; t <= sc.convergence.max_rounds; ++t) {
    if (!sc.schedule && sc.failures.fraction > 0.0 && t == sc.failures.round) {
      faults::restore_recovered(nodes, schedule, t);
      const auto eta = select_round(sc.algorithm, nodes, sc.round, t);
      schedule.merge(faults::plan_failures(eta.eta, sc.failures.fraction, t, sc.failures.seed,
                                           sc.failures.mode));
    }

    state = run_round(sc.algorithm, state, nodes, sc.round, schedule);
    cumulative += state.duration;
    eval = learner::evaluate(state.omega_next, *sc.test);
    losses.push_back(state.weighted_loss);

    RoundLog log{state.t,
                 state.eta,
                 state.failed,
                 state.replacements,
                 {},
                 state.weighted_loss,
                 eval.loss,
                 eval.accuracy,
                 state.duration.seconds(),
                 cumulative.seconds(),
                 state.omega_next.hash(),
                 {},
                 state.omega_t.hash()};
    for (const auto& r : state.responders) {
      log.responders.push_back(r.id);
      log.dispatched_hashes.push_back(r.dispatched_hash);
    }
    result.rounds.push_back(std::move(log));

    if (auto hit = detect_convergence(losses, sc.convergence)) {
      result.converged_at = hit->round;
      result.reason = hit->reason;
      break;
    }
  }

  result.C = cumulative;
  result.A = eval.accuracy;
  result.final_test_loss = eval.loss;
  result.final_weights = state.omega_next;
  result.schedule = schedule;
  return result;
}

std::string rounds_csv_header() {
  return "seed,round,algorithm,selected,failed,replacements,responders,weighted_loss,test_loss,"
         "accuracy,duration_s,cumulative_C_s,weights_hash\n";
}

void write_rounds_csv_rows(std::ostream& out, std::uint64_t seed, const ExperimentResult& result) {
  char hash[17];
  for (const auto& r : result.rounds) {
    std::snprintf(hash, sizeof(hash), "%016llx", static_cast<unsigned long long>(r.weights_hash));
    out << seed << ',' << r.round << ',' << to_string(result.algorithm) << ','
        << io::join_ids(r.selection.eta) << ',' << io::join_ids(r.failed) << ','
        << io::join_ids(r.replacements) << ',' << io::join_ids(r.responders) << ','
        << io::format_real(r.weighted_loss) << ',' << io::format_real(r.test_loss) << ','
        << io::format_real(r.accuracy) << ',' << io::format_real(r.duration) << ','
        << io::format_real(r.cumulative) << ',' << hash << '\n';
  }
}

}  // namespace fedfm::aggregator
