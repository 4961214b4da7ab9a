#include <cstdio>
#include <stdexcept>
#include <string>

#include <CLI11.hpp>

#include "mpcbo/scenario.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Data-driven MPC design by Bayesian optimization"};
  app.require_subcommand(1);

  CLI::App* run = app.add_subcommand("run", "Run a tracking scenario");
  std::string config_path;
  std::string scenario_name = "origin";
  std::string out_dir = "out";
  std::uint64_t seed = 0;
  bool seed_set = false;
  std::size_t kmax = 0;
  run->add_option("--config", config_path, "Scenario configuration file (JSON)");
  run->add_option("--scenario", scenario_name, "Built-in scenario: origin or circle")
      ->check(CLI::IsMember({"origin", "circle"}));
  run->add_option("--seed", seed, "Master seed override")
      ->each([&](const std::string&) { seed_set = true; });
  run->add_option("--out", out_dir, "Output directory");
  run->add_option("--kmax", kmax, "Iteration budget override");

  CLI11_PARSE(app, argc, argv);

  try {
    mpcbo::ScenarioConfig cfg;
    if (!config_path.empty()) {
      cfg = mpcbo::load_scenario(config_path);
    } else if (scenario_name == "circle") {
      cfg = mpcbo::ScenarioConfig::circle_defaults();
    } else {
      cfg = mpcbo::ScenarioConfig::origin_defaults();
    }
    if (seed_set) cfg.bo.master_seed = seed;
    if (kmax > 0) cfg.bo.k_max = kmax;
    cfg.validate();
    return mpcbo::run_scenario(cfg, out_dir);
  } catch (const std::invalid_argument& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "runtime failure: %s\n", e.what());
    return 3;
  }
}
