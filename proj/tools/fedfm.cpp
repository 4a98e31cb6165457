// Command-line front end for the federated-learning simulator.
#include <CLI11.hpp>

#include <iostream>
#include <string>
#include <vector>

#include "fedfm/config.hpp"
#include "fedfm/errors.hpp"
#include "fedfm/runner.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Deterministic federated-learning simulator with failure mitigation"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_dir = "out";
  std::size_t n_seeds = 0;
  std::vector<std::string> overrides;

  for (const auto& name : fedfm::cli::subcommands()) {
    auto* sub = app.add_subcommand(name);
    sub->add_option("--config", config_path, "Scenario JSON file (defaults apply when omitted)");
    sub->add_option("--out", out_dir, "Output directory")->capture_default_str();
    sub->add_option("--seeds", n_seeds, "Use master seeds 1..n instead of the configured list");
    sub->add_option("--override", overrides, "Dotted-path override, key=value (repeatable)");
  }

  CLI11_PARSE(app, argc, argv);
  const std::string subcommand = app.get_subcommands().front()->get_name();

  try {
    if (n_seeds > 0) overrides.push_back("seeds=" + [&] {
      std::string list = "[";
      for (std::size_t s = 1; s <= n_seeds; ++s) list += (s > 1 ? "," : "") + std::to_string(s);
      return list + "]";
    }());
    const auto cfg = fedfm::cli::load_config(config_path, overrides);
    std::cout << fedfm::cli::cmd_dispatch(subcommand, cfg, out_dir) << '\n';
    return 0;
  } catch (const fedfm::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const fedfm::RoundFailedError& e) {
    std::cerr << "round " << e.round() << " failed: " << e.what() << '\n';
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}
