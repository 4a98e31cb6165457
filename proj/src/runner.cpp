#include "fedfm/runner.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "fedfm/errors.hpp"
#include "fedfm/io.hpp"
#include "fedfm/rng.hpp"

namespace fedfm::cli {

namespace fs = std::filesystem;
using aggregator::ExperimentResult;
using aggregator::Scenario;

SeedPlan seed_plan(std::uint64_t master) {
  return {derive_seed(master, "data"),  derive_seed(master, "partition"), derive_seed(master, "ecosystem"),
          derive_seed(master, "init"),  derive_seed(master, "train"),     derive_seed(master, "strategy"),
          derive_seed(master, "failures")};
}

std::string axis_label(double value) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%g", value);
  return buf;
}

DataPair load_data(const ScenarioConfig& cfg, std::uint64_t master) {
  const auto& d = cfg.dataset;
  if (d.source == "idx") {
    // IDX files do not depend on the seed, so they are read once per path set.
    static std::map<std::vector<std::string>, std::pair<data::Dataset, data::Dataset>> cache;
    const std::vector<std::string> key{d.train_images, d.train_labels, d.test_images, d.test_labels};
    auto it = cache.find(key);
    if (it == cache.end()) {
      it = cache.emplace(key, std::make_pair(data::load_idx(d.train_images, d.train_labels),
                                             data::load_idx(d.test_images, d.test_labels)))
               .first;
    }
    return {std::make_shared<const data::Dataset>(data::take_prefix(it->second.first, d.train_limit)),
            std::make_shared<const data::Dataset>(data::take_prefix(it->second.second, d.test_limit))};
  }
  auto all = data::synth_blobs(d.n_classes, d.n_per_class, d.dim, d.spread, seed_plan(master).data);
  auto split = data::train_test_split(all, d.test_fraction);
  return {std::make_shared<const data::Dataset>(data::take_prefix(split.train, d.train_limit)),
          std::make_shared<const data::Dataset>(data::take_prefix(split.test, d.test_limit))};
}

learner::ModelSpec model_spec(const ScenarioConfig& cfg, const data::Dataset& train) {
  learner::ModelSpec spec;
  spec.layer_sizes.push_back(static_cast<std::size_t>(train.dim()));
  spec.layer_sizes.insert(spec.layer_sizes.end(), cfg.model.hidden.begin(), cfg.model.hidden.end());
  spec.layer_sizes.push_back(static_cast<std::size_t>(train.n_classes()));
  spec.activation = learner::parse_activation(cfg.model.activation);
  return spec;
}

std::map<int, std::vector<int>> exclusive_map(const ScenarioConfig& cfg, int n_classes) {
  const auto& e = cfg.ecosystem;
  if (e.exclusive_layout != "class-round-robin") return e.exclusive_map;
  std::map<int, std::vector<int>> m;
  for (int id = 0; id < static_cast<int>(e.K); ++id) m[id % n_classes].push_back(id);
  return m;
}

void resolve_timeout(const ScenarioConfig& cfg, Scenario& sc) {
  if (cfg.timing.timeout_s) {
    sc.round.timing.timeout = simclock::SimTime(*cfg.timing.timeout_s);
  } else {
    sc.round.timing.timeout = simclock::percentile_round_time(sc.nodes, sc.round.timing, sc.round.train,
                                                              cfg.timing.timeout_percentile);
  }
}

Scenario build_scenario(const ScenarioConfig& cfg, std::uint64_t master, const DataPair& data) {
  validate(cfg);
  const auto seeds = seed_plan(master);
  const auto spec = model_spec(cfg, *data.train);
  const auto constants = learner::model_constants(spec);

  Scenario sc;
  sc.test = data.test;

  topology::EcosystemSpec eco;
  eco.K = cfg.ecosystem.K;
  eco.power = cfg.ecosystem.power;
  eco.bandwidth = cfg.ecosystem.bandwidth;
  eco.partition.kind = data::parse_partition_kind(cfg.ecosystem.partition);
  eco.partition.mu_frac = cfg.ecosystem.mu_frac;
  eco.partition.sigma_frac = cfg.ecosystem.sigma_frac;
  eco.partition.exclusive_map = exclusive_map(cfg, data.train->n_classes());
  eco.partition.seed = seeds.partition;
  eco.seed = seeds.ecosystem;
  sc.nodes = topology::build_ecosystem(data.train, eco);

  sc.initial = learner::init_weights(spec, seeds.init);

  auto& r = sc.round;
  r.train.learning_rate = cfg.train.learning_rate;
  r.train.local_epochs = cfg.train.local_epochs;
  r.train.batch_size = cfg.train.batch_size;
  r.train.seed = seeds.train;
  r.score.alpha = cfg.score.alpha.value_or(constants.alpha_bytes);
  r.score.kappa = cfg.score.kappa.value_or(constants.kappa_bytes);
  // With these defaults S * V is exactly a node's round time.
  r.timing.compute_cost_per_sample_epoch = cfg.timing.compute_cost_per_sample_epoch.value_or(r.score.kappa);
  r.timing.model_bytes = cfg.timing.model_bytes.value_or(r.score.alpha);
  r.strategy = {selection::parse_strategy(cfg.selection.strategy), seeds.strategy};
  r.fraction = cfg.selection.fraction;

  sc.convergence = cfg.convergence;
  sc.algorithm = aggregator::parse_algorithm(cfg.algorithm);
  sc.failures = {cfg.failures.fraction, cfg.failures.round, faults::parse_mode(cfg.failures.mode),
                 seeds.failures};
  resolve_timeout(cfg, sc);
  return sc;
}

Scenario build_scenario(const ScenarioConfig& cfg, std::uint64_t master) {
  return build_scenario(cfg, master, load_data(cfg, master));
}

namespace {

ScenarioConfig iid_variant(const ScenarioConfig& cfg, std::size_t K) {
  auto c = cfg;
  c.ecosystem.K = K;
  c.ecosystem.partition = "uniform-iid";
  c.ecosystem.exclusive_map.clear();
  c.ecosystem.exclusive_layout.clear();
  c.failures.fraction = 0.0;
  return c;
}

}  // namespace

Scenario build_fail_scenario(const ScenarioConfig& cfg, std::uint64_t master, int contributing) {
  const auto c2 = iid_variant(cfg, cfg.sweep.eta2_K);
  const auto data = load_data(c2, master);
  auto sc = build_scenario(c2, master, data);

  const auto eta = aggregator::select_round(sc.algorithm, sc.nodes, sc.round, 1).eta;
  if (contributing < 1 || static_cast<std::size_t>(contributing) > eta.size()) {
    throw ConfigError("sweep.contributing: " + std::to_string(contributing) + " is outside [1, " +
                      std::to_string(eta.size()) + "]");
  }
  const std::size_t nu = eta.size() - static_cast<std::size_t>(contributing);

  std::vector<int> pool = eta;
  Rng rng(derive_seed(seed_plan(master).failures, "fail-vs-nofail"));
  rng.shuffle(std::span<int>(pool));
  std::vector<int> failed(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(nu));
  std::sort(failed.begin(), failed.end());

  faults::FailureSchedule schedule;
  if (nu > 0) {
    data::PartitionSpec ps;
    ps.kind = data::PartitionKind::exclusive_class;
    ps.seed = seed_plan(master).partition;
    for (int cls = 0; cls < cfg.sweep.exclusive_classes; ++cls) ps.exclusive_map[cls] = failed;
    auto shards = data::partition(data.train, sc.nodes.size(), ps);
    for (std::size_t i = 0; i < sc.nodes.size(); ++i) sc.nodes[i].shard = std::move(shards[i]);

    if (aggregator::select_round(sc.algorithm, sc.nodes, sc.round, 1).eta != eta) {
      throw ConsistencyError("fail-vs-nofail: re-partitioning changed the selected set");
    }
    schedule.entries[1].insert(failed.begin(), failed.end());
    resolve_timeout(c2, sc);
  }
  sc.schedule = schedule;
  return sc;
}

std::size_t nofail_K(double fraction, int contributing) {
  auto K = static_cast<std::size_t>(std::max(1, contributing));
  while (selection::selection_count(fraction, K) < static_cast<std::size_t>(contributing)) ++K;
  if (selection::selection_count(fraction, K) != static_cast<std::size_t>(contributing)) {
    throw ConfigError("no K gives floor(W * K) = " + std::to_string(contributing));
  }
  return K;
}

Scenario build_nofail_scenario(const ScenarioConfig& cfg, std::uint64_t master, int contributing) {
  const std::size_t K1 = nofail_K(cfg.selection.fraction, contributing);
  const auto c1 = iid_variant(cfg, K1);
  auto data = load_data(c1, master);
  const std::size_t per_node = data.train->size() / cfg.sweep.eta2_K;
  data.train = std::make_shared<const data::Dataset>(data::take_prefix(*data.train, per_node * K1));
  auto sc = build_scenario(c1, master, data);
  sc.schedule = faults::FailureSchedule{};
  return sc;
}

namespace {

void write_text(const fs::path& path, const std::string& text) {
  auto out = io::open_output(path);
  out << text;
  if (!out) throw IoError("write failed: " + path.string());
}

void write_audit(const fs::path& dir, const Scenario& sc, const ExperimentResult& result) {
  topology::write_ecosystem_csv(sc.nodes, dir / "ecosystem.csv");
  std::vector<data::DataShard> shards;
  for (const auto& n : sc.nodes) shards.push_back(n.shard);
  data::write_shards_csv(shards, dir / "shards.csv");
  faults::write_schedule_csv(result.schedule, dir / "schedule.csv");
  selection::SelectionCsv sel(dir / "selection.csv");
  for (const auto& r : result.rounds) sel.append(r.round, r.selection);
  sel.close();
}

}  // namespace

FamilyResult run_family(const std::string& name, const std::string& axis_name,
                        const std::vector<AxisRun>& runs, const std::vector<std::uint64_t>& seeds,
                        const fs::path& out, bool audit) {
  FamilyResult fam{name, axis_name, {}, {}};
  const fs::path root = name.empty() ? out : out / name;
  std::vector<metrics::Group> groups;

  for (const auto& run : runs) {
    const fs::path dir = root / (axis_name + "=" + run.label);
    std::ostringstream rounds;
    rounds << aggregator::rounds_csv_header();
    metrics::Group group{run.label, {}};
    std::vector<ExperimentResult> per_seed;

    for (auto seed : seeds) {
      const Scenario sc = run.build(run.cfg, seed);
      auto result = aggregator::run_experiment(sc);
      aggregator::write_rounds_csv_rows(rounds, seed, result);

      const fs::path seed_dir = dir / ("seed-" + std::to_string(seed));
      std::vector<std::pair<double, double>> curve;
      for (const auto& r : result.rounds) curve.emplace_back(r.cumulative, r.accuracy);
      metrics::write_series(seed_dir / "accuracy_vs_time.dat", "cumulative_C_s accuracy", curve);
      if (audit) write_audit(seed_dir, sc, result);

      group.observations.push_back({result.C.seconds(), result.A});
      per_seed.push_back(std::move(result));
    }

    write_text(dir / "rounds.csv", rounds.str());
    metrics::emit_csv(metrics::summarize(axis_name, std::span(&group, 1)), dir / "summary.csv");
    write_text(dir / "config.echo.json", to_json(run.cfg).dump(2) + "\n");
    groups.push_back(std::move(group));
    fam.results.push_back(std::move(per_seed));
  }

  fam.summary = metrics::summarize(axis_name, groups);
  metrics::emit_csv(fam.summary, root / "summary.csv");

  std::vector<std::pair<double, double>> c_series, a_series;
  for (const auto& p : fam.summary.points) {
    double x = 0.0;
    try {
      x = io::parse_real(p.axis);
    } catch (const Error&) {
      c_series.clear();
      break;
    }
    c_series.emplace_back(x, p.mean_C);
    a_series.emplace_back(x, p.mean_A);
  }
  if (!c_series.empty()) {
    metrics::write_series(root / "mean_C.dat", axis_name + " mean_C_s", c_series);
    metrics::write_series(root / "mean_A.dat", axis_name + " mean_A", a_series);
  }
  return fam;
}

namespace {

using Builder = std::function<Scenario(const ScenarioConfig&, std::uint64_t)>;

Builder default_builder() {
  return [](const ScenarioConfig& c, std::uint64_t seed) { return build_scenario(c, seed); };
}

std::string describe(const FamilyResult& fam) {
  std::ostringstream s;
  s.precision(6);
  if (!fam.name.empty()) s << fam.name << ' ';
  bool first = true;
  for (const auto& p : fam.summary.points) {
    s << (first ? "" : "; ") << fam.axis_name << '=' << p.axis << " C=" << p.mean_C << "s A=" << p.mean_A;
    first = false;
  }
  return s.str();
}

void echo_root(const ScenarioConfig& cfg, const fs::path& out) {
  write_text(out / "config.echo.json", to_json(cfg).dump(2) + "\n");
}

}  // namespace

std::string cmd_experiment(const ScenarioConfig& cfg, const fs::path& out) {
  echo_root(cfg, out);
  const auto fam = run_family("", "algorithm", {{cfg.algorithm, cfg, default_builder()}}, cfg.seeds, out, cfg.audit);
  return "experiment: " + describe(fam);
}

std::string cmd_sweep_fraction(const ScenarioConfig& cfg, const fs::path& out) {
  echo_root(cfg, out);
  std::vector<AxisRun> runs;
  for (double w : cfg.sweep.fractions) {
    auto c = cfg;
    c.selection.fraction = w;
    runs.push_back({axis_label(w), c, default_builder()});
  }
  return "sweep-fraction: " + describe(run_family("", "W", runs, cfg.seeds, out, cfg.audit));
}

std::string cmd_compare_strategies(const ScenarioConfig& cfg, const fs::path& out) {
  echo_root(cfg, out);
  std::vector<AxisRun> runs;
  for (const auto& s : cfg.sweep.strategies) {
    auto c = cfg;
    c.selection.strategy = s;
    runs.push_back({s, c, default_builder()});
  }
  return "compare-strategies: " + describe(run_family("", "strategy", runs, cfg.seeds, out, cfg.audit));
}

std::string cmd_sweep_failures(const ScenarioConfig& cfg, const fs::path& out) {
  echo_root(cfg, out);
  std::vector<AxisRun> runs;
  for (double f : cfg.sweep.failure_fractions) {
    auto c = cfg;
    c.failures.fraction = f;
    runs.push_back({axis_label(f), c, default_builder()});
  }
  return "sweep-failures: " + describe(run_family("", "f", runs, cfg.seeds, out, cfg.audit));
}

std::string cmd_fail_vs_nofail(const ScenarioConfig& cfg, const fs::path& out) {
  const auto eta2 = selection::selection_count(cfg.selection.fraction, cfg.sweep.eta2_K);
  for (int c : cfg.sweep.contributing) {
    if (static_cast<std::size_t>(c) > eta2) {
      throw ConfigError("sweep.contributing: entries must be in [1, |eta2|] = [1, " + std::to_string(eta2) + "]");
    }
  }
  echo_root(cfg, out);
  std::vector<AxisRun> fail, nofail;
  for (int c : cfg.sweep.contributing) {
    fail.push_back({std::to_string(c), cfg, [c](const ScenarioConfig& k, std::uint64_t s) {
                      return build_fail_scenario(k, s, c);
                    }});
    nofail.push_back({std::to_string(c), cfg, [c](const ScenarioConfig& k, std::uint64_t s) {
                        return build_nofail_scenario(k, s, c);
                      }});
  }
  const auto a = run_family("fail", "contributing", fail, cfg.seeds, out, cfg.audit);
  const auto b = run_family("nofail", "contributing", nofail, cfg.seeds, out, cfg.audit);
  return "fail-vs-nofail: " + describe(a) + " | " + describe(b);
}

std::string cmd_mitigation(const ScenarioConfig& cfg, const fs::path& out) {
  echo_root(cfg, out);
  std::string line = "mitigation:";
  for (const char* alg : {"fedfm", "fedavg-ignore"}) {
    std::vector<AxisRun> runs;
    for (double f : cfg.sweep.mitigation_fractions) {
      auto c = cfg;
      c.algorithm = alg;
      c.failures.fraction = f;
      runs.push_back({axis_label(f), c, default_builder()});
    }
    line += std::string(line.back() == ':' ? " " : " | ") +
            describe(run_family(alg, "f", runs, cfg.seeds, out, cfg.audit));
  }
  return line;
}

const std::vector<std::string>& subcommands() {
  static const std::vector<std::string> names{"experiment",    "sweep-fraction", "compare-strategies",
                                              "sweep-failures", "fail-vs-nofail", "mitigation"};
  return names;
}

std::string cmd_dispatch(const std::string& subcommand, const ScenarioConfig& cfg, const fs::path& out) {
  if (subcommand == "experiment") return cmd_experiment(cfg, out);
  if (subcommand == "sweep-fraction") return cmd_sweep_fraction(cfg, out);
  if (subcommand == "compare-strategies") return cmd_compare_strategies(cfg, out);
  if (subcommand == "sweep-failures") return cmd_sweep_failures(cfg, out);
  if (subcommand == "fail-vs-nofail") return cmd_fail_vs_nofail(cfg, out);
  if (subcommand == "mitigation") return cmd_mitigation(cfg, out);
  throw ConfigError("unknown subcommand '" + subcommand + "'");
}

}  // namespace fedfm::cli
