#include <doctest.h>

#include "fedfm/errors.hpp"
#include "fedfm/simclock.hpp"
#include "support.hpp"

using namespace fedfm;
using namespace fedfm::simclock;

namespace {
const auto kData = support::counting_dataset(200);

TimingModel timing(double cost, double bytes) { return {cost, bytes, SimTime(1.0)}; }
}  // namespace

TEST_CASE("node round time arithmetic") {
  const auto n = support::node(0, 100, 1000, 250, kData);
  learner::TrainConfig cfg;
  cfg.local_epochs = 1;
  CHECK(node_round_time(n, timing(10, 500), cfg).seconds() == doctest::Approx(3.0).epsilon(1e-15));
  cfg.local_epochs = 3;
  CHECK(node_round_time(n, timing(10, 500), cfg).seconds() == doctest::Approx(5.0).epsilon(1e-15));
}

TEST_CASE("node round time monotonicity and linearity") {
  learner::TrainConfig cfg;
  const auto slow = support::node(0, 50, 100, 10, kData);
  const auto fast = support::node(1, 50, 200, 10, kData);
  CHECK(node_round_time(fast, timing(3, 40), cfg) < node_round_time(slow, timing(3, 40), cfg));
  const auto b2 = support::node(2, 50, 100, 20, kData);
  const double diff = node_round_time(slow, timing(3, 40), cfg).seconds() - node_round_time(b2, timing(3, 40), cfg).seconds();
  CHECK(diff == doctest::Approx(40 * (1.0 / 10 - 1.0 / 20)).epsilon(1e-12));
}

TEST_CASE("round duration composition") {
  const std::vector<SimTime> r35{SimTime(3), SimTime(5)};
  CHECK(round_duration(r35, false, SimTime(4), {}).seconds() == 5.0);
  const std::vector<SimTime> r3{SimTime(3)};
  const std::vector<SimTime> rep{SimTime(2)};
  CHECK(round_duration(r3, true, SimTime(4), rep).seconds() == 6.0);
  CHECK(round_duration(r3, true, SimTime(4), {}).seconds() == 4.0);
  const std::vector<SimTime> r9{SimTime(9)};
  CHECK(round_duration(r9, true, SimTime(4), {}).seconds() == 9.0);
  CHECK(round_duration({}, false, SimTime(4), {}).seconds() == 0.0);
}

TEST_CASE("SimTime rejects negative and non-finite values") {
  CHECK_THROWS_AS(SimTime(-1.0), ConfigError);
  CHECK_THROWS_AS(SimTime(std::numeric_limits<double>::infinity()), ConfigError);
  SimTime t;
  t += SimTime(1.5);
  CHECK((t + SimTime(2)).seconds() == 3.5);
}

TEST_CASE("timeout percentile uses the nearest rank") {
  std::vector<topology::WorkerNode> nodes;
  // Times 1..20 seconds via the transmission term alone.
  for (int i = 1; i <= 20; ++i) nodes.push_back(support::node(i, 1, 1e300, 1.0 / i, kData));
  nodes.push_back(support::node(99, 0, 1, 1e-9, kData));  // empty nodes are ignored
  learner::TrainConfig cfg;
  const auto t = timing(1, 1);
  CHECK(percentile_round_time(nodes, t, cfg, 0.95).seconds() == doctest::Approx(19.0));
  CHECK(percentile_round_time(nodes, t, cfg, 1.0).seconds() == doctest::Approx(20.0));
  CHECK(percentile_round_time(nodes, t, cfg, 0.01).seconds() == doctest::Approx(1.0));
  CHECK_THROWS_AS(percentile_round_time(nodes, t, cfg, 0.0), ConfigError);
}
