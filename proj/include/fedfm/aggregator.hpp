#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "fedfm/dataset.hpp"
#include "fedfm/faults.hpp"
#include "fedfm/learner.hpp"
#include "fedfm/selection.hpp"
#include "fedfm/simclock.hpp"
#include "fedfm/topology.hpp"

namespace fedfm::aggregator {

// fedfm: timeout detection plus one replacement wave per round.
// fedavg_ignore: failed nodes are dropped and the aggregator keeps the same
// candidate set, since it never acts on a failure.
enum class Algorithm { fedfm, fedavg_ignore };

Algorithm parse_algorithm(std::string_view name);
std::string_view to_string(Algorithm a);

struct ClientModel {
  std::size_t n_k;
  learner::ModelWeights weights;
};

// sum_k (n_k / n) w_k with n = sum_k n_k over the given updates.
learner::ModelWeights fedavg_aggregate(std::span<const ClientModel> updates);

struct ConvergenceCriteria {
  double loss_threshold = 0.15;
  int stability_window = 5;
  double stability_epsilon = 1e-3;
  int max_rounds = 200;

  void validate() const;
  friend bool operator==(const ConvergenceCriteria&, const ConvergenceCriteria&) = default;
};

enum class ConvergenceReason { threshold_stable, plateau_high_loss, max_rounds };

std::string_view to_string(ConvergenceReason r);

struct ConvergenceHit {
  int round;  // 1-based
  ConvergenceReason reason;

  friend bool operator==(const ConvergenceHit&, const ConvergenceHit&) = default;
};

// First round r <= max_rounds whose trailing window of losses spans at most
// epsilon. The plateau is threshold-stable when its largest value is within
// the loss threshold, plateau-high-loss otherwise.
std::optional<ConvergenceHit> detect_convergence(std::span<const double> losses,
                                                 const ConvergenceCriteria& crit);

struct RoundConfig {
  learner::TrainConfig train;  // train.seed is the per-experiment training seed
  simclock::TimingModel timing;
  selection::SelectionStrategy strategy;
  selection::ScoreParams score;
  double fraction = 0.7;  // W

  void validate() const;
};

struct Responder {
  int id;
  std::size_t n_k;
  learner::ModelWeights weights;
  double train_loss;
  std::uint64_t dispatched_hash;  // hash of the weights the node started from
  bool replacement;
  simclock::SimTime time;
};

struct RoundState {
  int t = 0;
  learner::ModelWeights omega_t;     // global weights dispatched in round t
  learner::ModelWeights omega_next;  // aggregate produced by round t
  selection::SelectionOutcome eta;   // N_t
  std::vector<int> failed;           // F, in selection order
  std::vector<int> replacements;     // N_t^f, in rank order
  std::vector<int> empty;            // selected but without local data
  std::vector<Responder> responders;  // sorted by id
  double weighted_loss = 0.0;
  simclock::SimTime duration;
};

// State "before round 1": t = 0, omega_next = w0.
RoundState initial_state(learner::ModelWeights w0);

// m = max(floor(W * K), 1) with K the full ecosystem size.
std::size_t round_quota(const RoundConfig& cfg, std::size_t K);

// The N_t that run_round will pick in `round` for the current node flags.
selection::SelectionOutcome select_round(Algorithm algorithm,
                                         std::span<const topology::WorkerNode> nodes,
                                         const RoundConfig& cfg, int round);

// One global round t = prev.t + 1. Failures scheduled for t take effect after
// selection and before dispatch. Throws RoundFailedError when no update arrives.
RoundState run_round(Algorithm algorithm, const RoundState& prev,
                     std::span<topology::WorkerNode> nodes, const RoundConfig& cfg,
                     const faults::FailureSchedule& schedule);

RoundState run_round_fedfm(const RoundState& prev, std::span<topology::WorkerNode> nodes,
                           const RoundConfig& cfg, const faults::FailureSchedule& schedule);

RoundState run_round_fedavg_ignore(const RoundState& prev, std::span<topology::WorkerNode> nodes,
                                   const RoundConfig& cfg, const faults::FailureSchedule& schedule);

// Failures of `fraction` of N_t, planned at `round`.
struct FailurePlan {
  double fraction = 0.0;
  int round = 2;
  faults::FailureMode mode = faults::FailureMode::permanent;
  std::uint64_t seed = 0;
};

struct Scenario {
  std::shared_ptr<const data::Dataset> test;
  std::vector<topology::WorkerNode> nodes;
  learner::ModelWeights initial;
  RoundConfig round;
  ConvergenceCriteria convergence;
  Algorithm algorithm = Algorithm::fedfm;
  FailurePlan failures;
  // When set it replaces `failures`.
  std::optional<faults::FailureSchedule> schedule;
};

struct RoundLog {
  int round;
  selection::SelectionOutcome selection;
  std::vector<int> failed;
  std::vector<int> replacements;
  std::vector<int> responders;
  double weighted_loss;
  double test_loss;
  double accuracy;
  double duration;
  double cumulative;
  std::uint64_t weights_hash;
  std::vector<std::uint64_t> dispatched_hashes;  // one per responder
  std::uint64_t omega_t_hash;
};

struct ExperimentResult {
  Algorithm algorithm = Algorithm::fedfm;
  std::vector<RoundLog> rounds;
  simclock::SimTime C;
  double A = 0.0;
  double final_test_loss = 0.0;
  std::optional<int> converged_at;
  ConvergenceReason reason = ConvergenceReason::max_rounds;
  learner::ModelWeights final_weights;
  faults::FailureSchedule schedule;
};

ExperimentResult run_experiment(const Scenario& scenario);

std::string rounds_csv_header();
// One row per round, prefixed with the master seed.
void write_rounds_csv_rows(std::ostream& out, std::uint64_t seed, const ExperimentResult& result);

}  // namespace fedfm::aggregator
