#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "fedfm/aggregator.hpp"
#include "fedfm/config.hpp"
#include "fedfm/metrics.hpp"

namespace fedfm::cli {

// Every module seed is derived from the master seed under a fixed tag, so two
// configs that differ only in the studied axis share all other randomness.
struct SeedPlan {
  std::uint64_t data, partition, ecosystem, init, train, strategy, failures;
};
SeedPlan seed_plan(std::uint64_t master);

struct DataPair {
  std::shared_ptr<const data::Dataset> train, test;
};
DataPair load_data(const ScenarioConfig& cfg, std::uint64_t master);

learner::ModelSpec model_spec(const ScenarioConfig& cfg, const data::Dataset& train);

// Resolved exclusive-class map (explicit map or layout); empty when neither is set.
std::map<int, std::vector<int>> exclusive_map(const ScenarioConfig& cfg, int n_classes);

// Builds a ready-to-run scenario from the config.
aggregator::Scenario build_scenario(const ScenarioConfig& cfg, std::uint64_t master, const DataPair& data);
aggregator::Scenario build_scenario(const ScenarioConfig& cfg, std::uint64_t master);

// Fills in T from the nodes when the config leaves it unset.
void resolve_timeout(const ScenarioConfig& cfg, aggregator::Scenario& sc);

// Failure side of the fail-vs-nofail comparison: eta2_K nodes, the
// |eta2| - contributing failed nodes are chosen up front and own the first
// exclusive_classes classes exclusively, and they all drop out in round 1.
aggregator::Scenario build_fail_scenario(const ScenarioConfig& cfg, std::uint64_t master, int contributing);
// No-failure side: the smallest K1 with floor(W * K1) == contributing, IID,
// and the same per-node volume as the failure side.
aggregator::Scenario build_nofail_scenario(const ScenarioConfig& cfg, std::uint64_t master, int contributing);
std::size_t nofail_K(double fraction, int contributing);

// One axis value of a sweep and how to run it for a seed.
struct AxisRun {
  std::string label;
  ScenarioConfig cfg;
  std::function<aggregator::Scenario(const ScenarioConfig&, std::uint64_t)> build;
};

struct FamilyResult {
  std::string name;  // subdirectory ("" for the output root)
  std::string axis_name;
  metrics::SweepResult summary;
  // Per axis value, the per-seed results in seed order.
  std::vector<std::vector<aggregator::ExperimentResult>> results;
};

// Runs every axis value for every seed, writing
//   <out>/<name>/<axis>=<label>/{rounds.csv,summary.csv,config.echo.json,seed-<s>/...}
// and <out>/<name>/summary.csv plus plot data.
FamilyResult run_family(const std::string& name, const std::string& axis_name,
                        const std::vector<AxisRun>& runs, const std::vector<std::uint64_t>& seeds,
                        const std::filesystem::path& out, bool audit);

// Subcommands. Each writes under `out` and returns a one-line summary.
std::string cmd_experiment(const ScenarioConfig& cfg, const std::filesystem::path& out);
std::string cmd_sweep_fraction(const ScenarioConfig& cfg, const std::filesystem::path& out);
std::string cmd_compare_strategies(const ScenarioConfig& cfg, const std::filesystem::path& out);
std::string cmd_sweep_failures(const ScenarioConfig& cfg, const std::filesystem::path& out);
std::string cmd_fail_vs_nofail(const ScenarioConfig& cfg, const std::filesystem::path& out);
std::string cmd_mitigation(const ScenarioConfig& cfg, const std::filesystem::path& out);

std::string cmd_dispatch(const std::string& subcommand, const ScenarioConfig& cfg,
                         const std::filesystem::path& out);
const std::vector<std::string>& subcommands();

// Axis label text for a numeric value ("%g").
std::string axis_label(double value);

}  // namespace fedfm::cli
