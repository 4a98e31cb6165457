// Acceptance suite: one PASS/FAIL/SKIP line per criterion. Exit status is
// nonzero when any criterion fails.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <limits>
#include <map>
#include <string>
#include <tuple>
#include <vector>

#include "fedfm/aggregator.hpp"
#include "fedfm/config.hpp"
#include "fedfm/errors.hpp"
#include "fedfm/io.hpp"
#include "fedfm/learner.hpp"
#include "fedfm/metrics.hpp"
#include "fedfm/rng.hpp"
#include "fedfm/runner.hpp"
#include "fedfm/selection.hpp"

namespace fs = std::filesystem;
using namespace fedfm;

namespace {

struct Verdict {
  enum Kind { pass, fail, skip } kind;
  std::string detail;
};

Verdict ok(bool good, std::string detail) { return {good ? Verdict::pass : Verdict::fail, std::move(detail)}; }

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof(buf), f, args...);
  return buf;
}

fs::path work_dir() {
  static const fs::path dir = [] {
    auto d = fs::temp_directory_path() / "fedfm-acceptance";
    fs::remove_all(d);
    fs::create_directories(d);
    return d;
  }();
  return dir;
}

cli::ScenarioConfig scenario(const std::string& file, std::vector<std::string> overrides = {}) {
  return cli::load_config(fs::path(FEDFM_CONFIG_DIR) / file, overrides);
}

metrics::SweepResult summary(const fs::path& p) { return metrics::read_csv(p); }

const metrics::SweepPoint& point(const metrics::SweepResult& s, const std::string& axis) {
  for (const auto& p : s.points) {
    if (p.axis == axis) return p;
  }
  throw ConsistencyError("summary has no axis value " + axis);
}

// ---------------------------------------------------------------------------

Verdict no_failure_equivalence() {
  const auto t0 = std::chrono::steady_clock::now();
  auto cfg = scenario("experiment.json");
  int bad = 0;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    auto sc = cli::build_scenario(cfg, seed);
    sc.failures.fraction = 0.0;
    sc.algorithm = aggregator::Algorithm::fedfm;
    const auto a = aggregator::run_experiment(sc);
    sc.algorithm = aggregator::Algorithm::fedavg_ignore;
    const auto b = aggregator::run_experiment(sc);
    bool same = a.rounds.size() == b.rounds.size() && a.C == b.C && a.A == b.A &&
                a.final_weights == b.final_weights;
    for (std::size_t r = 0; same && r < a.rounds.size(); ++r) {
      same = a.rounds[r].weights_hash == b.rounds[r].weights_hash;
    }
    bad += same ? 0 : 1;
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return ok(bad == 0 && secs < 120.0, fmt("%d of 5 seeds differ, %.1f s", bad, secs));
}

Verdict aggregation_oracle() {
  Rng rng(2024);
  double worst = 0.0;
  for (int set = 0; set < 1000; ++set) {
    const std::size_t k = 1 + rng.below(20);
    const std::size_t dim = 1 + rng.below(64);
    // Shape only matters through equality; {dim - 1, 1} has exactly dim parameters.
    const learner::ModelSpec spec{{dim - 1, 1}};
    std::vector<aggregator::ClientModel> ups;
    for (std::size_t i = 0; i < k; ++i) {
      learner::ModelWeights w{spec, std::vector<double>(dim)};
      for (auto& v : w.values) v = rng.uniform(-10.0, 10.0);
      ups.push_back({1 + rng.below(1000), std::move(w)});
    }
    const auto got = aggregator::fedavg_aggregate(ups);
    long double n = 0;
    for (const auto& u : ups) n += u.n_k;
    for (std::size_t j = 0; j < dim; ++j) {
      long double ref = 0, scale = 0;
      for (const auto& u : ups) {
        ref += u.n_k * static_cast<long double>(u.weights.values[j]);
        scale += u.n_k * std::fabs(static_cast<long double>(u.weights.values[j]));
      }
      ref /= n;
      scale /= n;
      // Relative to the magnitude of the averaged terms so cancellation is not penalized.
      const double denom = static_cast<double>(std::max(std::fabs(ref), scale));
      if (denom > 0) worst = std::max(worst, std::fabs(got.values[j] - static_cast<double>(ref)) / denom);
    }
  }
  return ok(worst <= 1e-12, fmt("worst relative error %.3g", worst));
}

Verdict gradient_check() {
  Rng rng(77);
  double worst = 0.0;
  std::size_t coords = 0;
  for (auto act : {learner::Activation::relu, learner::Activation::tanh}) {
    for (const auto& sizes : {std::vector<std::size_t>{3, 4, 2}, std::vector<std::size_t>{5, 3}}) {
      const learner::ModelSpec spec{sizes, act};
      for (int draw = 0; draw < 20; ++draw) {
        learner::ModelWeights w{spec, std::vector<double>(spec.parameter_count())};
        for (auto& v : w.values) v = rng.uniform(-1.0, 1.0);
        std::vector<double> x(sizes.front());
        for (auto& v : x) v = rng.uniform(-2.0, 2.0);
        const int label = static_cast<int>(rng.below(sizes.back()));
        const auto an = learner::loss_and_gradient(w, x, label);
        const double h = 1e-5;
        for (std::size_t i = 0; i < w.values.size(); ++i) {
          auto plus = w, minus = w;
          plus.values[i] += h;
          minus.values[i] -= h;
          const double fd =
              (learner::sample_loss(plus, x, label) - learner::sample_loss(minus, x, label)) / (2 * h);
          const double a = an.gradient[i];
          worst = std::max(worst, std::fabs(fd - a) / std::max({std::fabs(fd), std::fabs(a), 1e-6}));
          ++coords;
        }
      }
    }
  }
  return ok(worst <= 1e-4, fmt("%zu coordinates, worst relative error %.3g", coords, worst));
}

// Rank oracle: sort (unscorable, -key, id) tuples.
std::vector<int> oracle_ranking(const std::vector<topology::WorkerNode>& nodes,
                                const selection::SelectionStrategy& s, const selection::ScoreParams& p) {
  std::vector<double> rkeys(nodes.size());
  Rng rng(derive_seed(s.seed, "random-selection"));
  for (auto& k : rkeys) k = rng.uniform();
  std::vector<std::tuple<int, double, int>> rows;
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    const auto& n = nodes[i];
    if (!n.alive) continue;
    const double V = static_cast<double>(n.volume());
    int group = 0;
    double key = 0.0;
    switch (s.kind) {
      case selection::StrategyKind::s_based:
        if (n.volume() == 0) group = 1;
        else key = (p.alpha / n.bandwidth + p.kappa * V / n.power) * (1.0 / V);
        break;
      case selection::StrategyKind::random: key = rkeys[i]; break;
      case selection::StrategyKind::top_volume: key = V; break;
      case selection::StrategyKind::top_power: key = n.power; break;
      case selection::StrategyKind::top_bandwidth: key = n.bandwidth; break;
    }
    rows.emplace_back(group, -key, n.id);
  }
  std::sort(rows.begin(), rows.end());
  std::vector<int> ids;
  for (const auto& r : rows) ids.push_back(std::get<2>(r));
  return ids;
}

Verdict selection_correctness() {
  auto data = std::make_shared<data::Dataset>(2, 1);
  for (int i = 0; i < 64; ++i) {
    const double x = i;
    data->add(std::span<const double>(&x, 1), i % 2);
  }
  const std::shared_ptr<const data::Dataset> source = data;
  Rng rng(4242);
  int mismatches = 0, total = 0;
  for (int eco = 0; eco < 200; ++eco) {
    const std::size_t K = 1 + rng.below(50);
    const bool coarse = eco % 2 == 0;  // many exact ties
    const bool all_alive = eco % 4 < 2;
    std::vector<topology::WorkerNode> nodes(K);
    for (std::size_t i = 0; i < K; ++i) {
      auto& n = nodes[i];
      n.id = static_cast<int>(i);
      n.shard.owner = n.id;
      n.shard.source = source;
      const std::size_t V = coarse ? rng.below(4) : rng.below(64);
      for (std::size_t j = 0; j < V; ++j) n.shard.indices.push_back(j);
      n.power = coarse ? static_cast<double>(1 + rng.below(3)) : rng.uniform(1.0, 1e3);
      n.bandwidth = coarse ? static_cast<double>(1 + rng.below(3)) : rng.uniform(1.0, 1e3);
      n.alive = all_alive || rng.uniform() < 0.8;
    }
    nodes[rng.below(K)].alive = true;
    std::size_t alive = 0;
    for (const auto& n : nodes) alive += n.alive ? 1 : 0;
    const double W = eco % 5 == 0 ? 0.7 : rng.uniform(0.01, 1.0);
    const selection::ScoreParams p{rng.uniform(1.0, 100.0), rng.uniform(1.0, 100.0)};
    for (auto kind : {selection::StrategyKind::s_based, selection::StrategyKind::random,
                      selection::StrategyKind::top_volume, selection::StrategyKind::top_power,
                      selection::StrategyKind::top_bandwidth}) {
      const selection::SelectionStrategy s{kind, rng.next_u64()};
      const auto out = selection::select_top(nodes, W, s, p);
      const auto expect = oracle_ranking(nodes, s, p);
      const auto m = std::max<std::size_t>(static_cast<std::size_t>(std::floor(W * double(alive) + 1e-9)), 1);
      const bool good = out.m == m && out.ranking == expect &&
                        out.eta == std::vector<int>(expect.begin(), expect.begin() + static_cast<std::ptrdiff_t>(m));
      mismatches += good ? 0 : 1;
      ++total;
    }
  }
  return ok(mismatches == 0, fmt("%d of %d selections differ from the oracle", mismatches, total));
}

std::map<std::string, std::string> read_tree(const fs::path& root) {
  std::map<std::string, std::string> files;
  for (const auto& e : fs::recursive_directory_iterator(root)) {
    if (e.is_regular_file()) files[fs::relative(e.path(), root).string()] = io::read_file(e.path());
  }
  return files;
}

Verdict determinism() {
  const std::vector<std::string> small{"seeds=[1,2]", "convergence.max_rounds=15"};
  int differ = 0, compared = 0;
  for (const auto& [sub, file] : std::vector<std::pair<std::string, std::string>>{
           {"experiment", "experiment.json"}, {"mitigation", "mitigation.json"},
           {"fail-vs-nofail", "fail_vs_nofail.json"}}) {
    const auto cfg = scenario(file, small);
    const auto a = work_dir() / ("det-" + sub + "-a");
    const auto b = work_dir() / ("det-" + sub + "-b");
    cli::cmd_dispatch(sub, cfg, a);
    cli::cmd_dispatch(sub, cfg, b);
    const auto ta = read_tree(a), tb = read_tree(b);
    differ += ta == tb ? 0 : 1;
    compared += static_cast<int>(ta.size());
  }
  return ok(differ == 0, fmt("%d files compared, %d trees differ", compared, differ));
}

Verdict fraction_benefit() {
  const auto out = work_dir() / "sweep-fraction";
  cli::cmd_sweep_fraction(scenario("sweep_fraction.json"), out);
  const auto s = summary(out / "summary.csv");
  const auto& w7 = point(s, "0.7");
  const auto& w10 = point(s, "1");
  return ok(w7.mean_C <= 0.9 * w10.mean_C && w7.mean_A >= w10.mean_A - 0.02,
            fmt("C(0.7)=%.1f s vs C(1.0)=%.1f s (ratio %.3f); A(0.7)=%.4f vs A(1.0)=%.4f", w7.mean_C, w10.mean_C,
                w7.mean_C / w10.mean_C, w7.mean_A, w10.mean_A));
}

Verdict strategy_ranking() {
  const auto out = work_dir() / "compare-strategies";
  cli::cmd_compare_strategies(scenario("compare_strategies.json"), out);
  const auto s = summary(out / "summary.csv");
  const double sb = point(s, "s-based").mean_C, rnd = point(s, "random").mean_C;
  const double naive = std::min({point(s, "top-volume").mean_C, point(s, "top-power").mean_C,
                                 point(s, "top-bandwidth").mean_C});
  return ok(sb < rnd && sb <= 1.05 * naive,
            fmt("C s-based=%.1f s, random=%.1f s, best naive=%.1f s", sb, rnd, naive));
}

Verdict failure_degradation() {
  const auto out = work_dir() / "sweep-failures";
  cli::cmd_sweep_failures(scenario("sweep_failures.json"), out);
  const auto s = summary(out / "summary.csv");
  bool good = s.points.size() == 4;
  std::string detail = "A:";
  for (std::size_t i = 0; i < s.points.size(); ++i) {
    detail += fmt(" f=%s %.4f", s.points[i].axis.c_str(), s.points[i].mean_A);
    if (i > 0 && s.points[i].mean_A > s.points[i - 1].mean_A + 0.005) good = false;
  }
  return ok(good, detail);
}

Verdict fail_vs_nofail_gap() {
  const auto out = work_dir() / "fail-vs-nofail";
  cli::cmd_fail_vs_nofail(scenario("fail_vs_nofail.json"), out);
  const auto fail = summary(out / "fail" / "summary.csv");
  const auto nofail = summary(out / "nofail" / "summary.csv");
  bool good = true;
  std::string detail;
  for (const char* c : {"10", "30", "50"}) {
    const double a = point(nofail, c).mean_A, b = point(fail, c).mean_A;
    good = good && a - b >= 0.02;
    detail += fmt("c=%s nofail %.4f fail %.4f; ", c, a, b);
  }
  return ok(good, detail);
}

// Per seed: cumulative time and accuracy per round, from a rounds.csv.
std::map<std::uint64_t, std::vector<std::pair<double, double>>> curves(const fs::path& rounds_csv) {
  std::map<std::uint64_t, std::vector<std::pair<double, double>>> out;
  const auto lines = io::split(io::read_file(rounds_csv), '\n');
  for (std::size_t i = 1; i < lines.size(); ++i) {
    if (lines[i].empty()) continue;
    const auto f = io::split(lines[i], ',');
    out[static_cast<std::uint64_t>(io::parse_int(f[0]))].emplace_back(io::parse_real(f[11]), io::parse_real(f[9]));
  }
  return out;
}

// Seed-averaged accuracy-vs-time curve. Each seed contributes a step
// function: 0 before its first round ends, its last accuracy after it stops.
std::vector<std::pair<double, double>> mean_curve(
    const std::map<std::uint64_t, std::vector<std::pair<double, double>>>& per_seed) {
  std::vector<double> times;
  for (const auto& [seed, c] : per_seed) {
    for (const auto& pt : c) times.push_back(pt.first);
  }
  std::sort(times.begin(), times.end());
  times.erase(std::unique(times.begin(), times.end()), times.end());
  std::vector<std::pair<double, double>> out;
  for (double t : times) {
    double sum = 0.0;
    for (const auto& [seed, c] : per_seed) {
      double a = 0.0;
      for (const auto& [ct, ca] : c) {
        if (ct > t) break;
        a = ca;
      }
      sum += a;
    }
    out.emplace_back(t, sum / static_cast<double>(per_seed.size()));
  }
  return out;
}

double first_time_reaching(const std::vector<std::pair<double, double>>& curve, double target) {
  for (const auto& [t, a] : curve) {
    if (a >= target - 1e-12) return t;
  }
  return std::numeric_limits<double>::infinity();
}

Verdict mitigation_benefit() {
  const auto out = work_dir() / "mitigation";
  cli::cmd_mitigation(scenario("mitigation.json"), out);
  const auto fm = summary(out / "fedfm" / "summary.csv");
  const auto fa = summary(out / "fedavg-ignore" / "summary.csv");
  bool good = true;
  std::string detail;
  for (const char* f : {"0.2", "0.4", "0.6"}) {
    const double a = point(fm, f).mean_A, b = point(fa, f).mean_A;
    good = good && a >= b && (std::string(f) != "0.6" || a - b >= 0.01);

    // Plateau: FedAvg-ignore's mean final accuracy, read off the mean curves.
    const auto cfm = mean_curve(curves(out / "fedfm" / ("f=" + std::string(f)) / "rounds.csv"));
    const auto cfa = mean_curve(curves(out / "fedavg-ignore" / ("f=" + std::string(f)) / "rounds.csv"));
    const double plateau = cfa.back().second;
    const double t_fm = first_time_reaching(cfm, plateau), t_fa = first_time_reaching(cfa, plateau);
    good = good && t_fm <= t_fa;
    detail += fmt("f=%s A %.4f vs %.4f, time-to-plateau %.0f s vs %.0f s; ", f, a, b, t_fm, t_fa);
  }
  return ok(good, detail);
}

Verdict mnist_spot_check() {
  const char* dir = std::getenv("FEDFM_MNIST_DIR");
  if (!dir || !*dir) return {Verdict::skip, "FEDFM_MNIST_DIR not set"};
  const fs::path d(dir);
  const std::vector<std::string> paths{"dataset.train_images=\"" + (d / "train-images-idx3-ubyte").string() + "\"",
                                       "dataset.train_labels=\"" + (d / "train-labels-idx1-ubyte").string() + "\"",
                                       "dataset.test_images=\"" + (d / "t10k-images-idx3-ubyte").string() + "\"",
                                       "dataset.test_labels=\"" + (d / "t10k-labels-idx1-ubyte").string() + "\""};
  const auto cfg = scenario("mnist.json", paths);
  const auto pair = cli::load_data(cfg, 1);

  data::DataShard all;
  all.source = pair.train;
  for (std::size_t i = 0; i < pair.train->size(); ++i) all.indices.push_back(i);
  const auto spec = cli::model_spec(cfg, *pair.train);
  learner::TrainConfig tc{cfg.train.learning_rate, 3, cfg.train.batch_size, derive_seed(1, "central")};
  const auto central = learner::client_update(learner::init_weights(spec, derive_seed(1, "init")), all, tc);
  const double a_central = learner::evaluate(central.weights, *pair.test).accuracy;

  const auto fed = aggregator::run_experiment(cli::build_scenario(cfg, 1, pair));
  return ok(a_central >= 0.90 && fed.A >= a_central - 0.03 && fed.rounds.size() <= 20,
            fmt("centralized %.4f, federated %.4f after %zu rounds", a_central, fed.A, fed.rounds.size()));
}

}  // namespace

// Optional arguments pick criteria by number; all run by default.
int main(int argc, char** argv) {
  const std::vector<std::pair<std::string, std::function<Verdict()>>> criteria{
      {"no-failure equivalence", no_failure_equivalence},
      {"aggregation oracle", aggregation_oracle},
      {"gradient check", gradient_check},
      {"selection correctness", selection_correctness},
      {"determinism", determinism},
      {"70% fraction benefit", fraction_benefit},
      {"strategy ranking", strategy_ranking},
      {"failure degradation trend", failure_degradation},
      {"fail-vs-nofail gap", fail_vs_nofail_gap},
      {"mitigation benefit", mitigation_benefit},
      {"MNIST spot-check", mnist_spot_check},
  };
  std::vector<bool> wanted(criteria.size(), argc <= 1);
  for (int a = 1; a < argc; ++a) {
    const long k = std::strtol(argv[a], nullptr, 10);
    if (k >= 1 && static_cast<std::size_t>(k) <= criteria.size()) wanted[static_cast<std::size_t>(k - 1)] = true;
  }
  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    if (!wanted[i]) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Verdict v;
    try {
      v = criteria[i].second();
    } catch (const std::exception& e) {
      v = {Verdict::fail, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const char* tag = v.kind == Verdict::pass ? "PASS" : v.kind == Verdict::fail ? "FAIL" : "SKIP";
    std::printf("[%s] %2zu %s: %s (%.1f s)\n", tag, i + 1, criteria[i].first.c_str(), v.detail.c_str(), secs);
    std::fflush(stdout);
    failures += v.kind == Verdict::fail ? 1 : 0;
  }
  return failures == 0 ? 0 : 1;
}
