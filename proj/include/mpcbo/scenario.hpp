#ifndef MPCBO_SCENARIO_HPP
#define MPCBO_SCENARIO_HPP

#include <array>
#include <cstdint>
#include <string>

#include "mpcbo/matrix.hpp"
#include "mpcbo/mpc.hpp"
#include "mpcbo/plant.hpp"
#include "mpcbo/predmodel.hpp"

namespace mpcbo {

enum class ReferenceKind { kOrigin, kCircle };

struct ReferenceConfig {
  ReferenceKind kind = ReferenceKind::kOrigin;
  double radius = 0.05;                   // m, circle only
  double period = 20.0;                   // s, one revolution
  std::array<double, 2> center{0.0, 0.0};
};

struct BoConfig {
  std::size_t k_max = 100;
  std::size_t n_seeds = 10;
  std::size_t acquisition_budget = 4096;
  std::uint64_t master_seed = 1;
  std::size_t gp_restarts = 8;
  std::size_t gp_max_iterations = 200;
  std::size_t gp_active_set_size = 300;
};

struct ScenarioConfig {
  std::string name = "origin";
  double duration = 20.0;  // s
  double dt = 0.05;        // s
  ReferenceConfig reference;
  MpcConfig mpc = MpcConfig::defaults();
  BoConfig bo;
  SoftRodPlant plant;
  std::array<double, 2> initial_q{0.0, 0.0};
  ModelDims model_dims;
  double theta_a_bound = 1.2;
  double theta_b_bound = 0.5;

  std::size_t steps() const;
  void validate() const;  // throws std::invalid_argument with a diagnostic

  static ScenarioConfig origin_defaults();
  static ScenarioConfig circle_defaults();
};

/// Reference position at step index t (t >= 1; larger values give the MPC
/// preview window, extended by rotation for the circle and constant
/// otherwise).
Vector reference_at(const ScenarioConfig& cfg, std::size_t t);

// JSON (de)serialization; parse errors surface as std::invalid_argument.
ScenarioConfig load_scenario(const std::string& path);
void save_scenario(const ScenarioConfig& cfg, const std::string& path);
ScenarioConfig scenario_from_json_text(const std::string& text);
std::string scenario_to_json_text(const ScenarioConfig& cfg);

/// Runs the full BO loop and writes convergence.csv, best_trajectory.csv,
/// theta_best.csv and report.txt into out_dir. Returns a process exit
/// status: 0 success, 3 runtime failure.
int run_scenario(const ScenarioConfig& cfg, const std::string& out_dir);

}  // namespace mpcbo

#endif
