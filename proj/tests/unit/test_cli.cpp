#include <doctest.h>

#include <cstdlib>
#include <sys/wait.h>

#include "support.hpp"

namespace {

int run(const std::string& args) {
  const std::string cmd = std::string(FEDFM_CLI) + " " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

const std::string kSmall =
    " --seeds 1 --override dataset.n_per_class=100 --override convergence.max_rounds=4 --override ecosystem.K=10";

std::string tree(const std::filesystem::path& root) {
  std::string all;
  std::vector<std::filesystem::path> files;
  for (const auto& e : std::filesystem::recursive_directory_iterator(root)) {
    if (e.is_regular_file()) files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  for (const auto& f : files) all += std::filesystem::relative(f, root).string() + "\n" + support::slurp(f);
  return all;
}

}  // namespace

TEST_CASE("exit codes") {
  const auto dir = support::scratch("cli");
  CHECK(run("experiment --out " + (dir / "ok").string() + kSmall) == 0);
  CHECK(run("experiment --out " + (dir / "bad").string() + " --override selection.fraction=2") == 2);
  CHECK(run("experiment --out " + (dir / "bad").string() + " --override nonsense=1") == 2);
  // W = 0.1 of K = 10 selects one node; losing it leaves nothing to aggregate.
  CHECK(run("experiment --out " + (dir / "dead").string() + kSmall +
            " --override selection.fraction=0.1 --override failures.fraction=1") == 3);
  CHECK(run("no-such-command") != 0);
}

TEST_CASE("experiment output is reproducible") {
  const auto dir = support::scratch("cli-repro");
  REQUIRE(run("experiment --out " + (dir / "a").string() + kSmall) == 0);
  REQUIRE(run("experiment --out " + (dir / "b").string() + kSmall) == 0);
  const auto a = tree(dir / "a");
  CHECK(a.find("rounds.csv") != std::string::npos);
  CHECK(a.find("config.echo.json") != std::string::npos);
  CHECK(a == tree(dir / "b"));
}

TEST_CASE("the echoed config replays the run") {
  const auto dir = support::scratch("cli-echo");
  REQUIRE(run("experiment --out " + (dir / "a").string() + kSmall) == 0);
  REQUIRE(run("experiment --config " + (dir / "a" / "config.echo.json").string() + " --out " +
              (dir / "b").string()) == 0);
  CHECK(tree(dir / "a") == tree(dir / "b"));
}
