#include "mpcbo/scenario.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "mpcbo/bo.hpp"

namespace mpcbo {

namespace {
using nlohmann::json;

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.12g", v);
  return buf;
}

Vector diag_of(const Matrix& m) {
  Vector d(m.rows());
  for (std::size_t i = 0; i < m.rows(); ++i) d[i] = m(i, i);
  return d;
}

Matrix diag_matrix(const Vector& d) {
  Matrix m(d.size(), d.size());
  for (std::size_t i = 0; i < d.size(); ++i) m(i, i) = d[i];
  return m;
}

}  // namespace

std::size_t ScenarioConfig::steps() const {
  return static_cast<std::size_t>(std::llround(duration / dt));
}

void ScenarioConfig::validate() const {
  if (!(dt > 0.0) || !(duration > 0.0)) {
    throw std::invalid_argument("duration and dt must be positive");
  }
  const double n = duration / dt;
  if (std::abs(n - std::round(n)) > 1e-9) {
    throw std::invalid_argument("duration must be an integer multiple of dt");
  }
  if (steps() < mpc.horizon) {
    throw std::invalid_argument("episode shorter than the MPC horizon");
  }
  try {
    mpc.validate();
  } catch (const std::exception& e) {
    throw std::invalid_argument(std::string("mpc config: ") + e.what());
  }
  if (reference.kind == ReferenceKind::kCircle) {
    double bound = 1e300;
    for (double v : mpc.y_min) bound = std::min(bound, std::abs(v));
    for (double v : mpc.y_max) bound = std::min(bound, v);
    if (reference.radius > bound) {
      throw std::invalid_argument("circle radius exceeds the output bounds");
    }
    if (!(reference.period > 0.0)) {
      throw std::invalid_argument("circle period must be positive");
    }
  }
  if (!(plant.mass > 0.0) || !(plant.stiffness > 0.0) || plant.cubic_stiffness < 0.0 ||
      plant.damping < 0.0 || plant.noise_std < 0.0 || plant.substeps < 1) {
    throw std::invalid_argument("invalid plant parameters");
  }
  if (bo.k_max < 1 || bo.n_seeds < 1) {
    throw std::invalid_argument("bo.k_max and bo.n_seeds must be at least 1");
  }
  if (model_dims.n_y > model_dims.n_z) {
    throw std::invalid_argument("model n_y must not exceed n_z");
  }
  if (mpc.u_min.size() != model_dims.n_u || mpc.y_min.size() != model_dims.n_y) {
    throw std::invalid_argument("mpc bound dimensions disagree with model dims");
  }
}

ScenarioConfig ScenarioConfig::origin_defaults() {
  ScenarioConfig cfg;
  cfg.name = "origin";
  cfg.reference.kind = ReferenceKind::kOrigin;
  cfg.initial_q = {0.08, -0.06};
  // Lightly tensioned rig: the free response rings for seconds, so the gap
  // between an uninformed model and a tuned one is large.
  cfg.plant.damping = 0.05;
  return cfg;
}

ScenarioConfig ScenarioConfig::circle_defaults() {
  ScenarioConfig cfg;
  cfg.name = "circle";
  cfg.reference.kind = ReferenceKind::kCircle;
  cfg.initial_q = {0.0, 0.0};
  return cfg;
}

Vector reference_at(const ScenarioConfig& cfg, std::size_t t) {
  Vector r{cfg.reference.center[0], cfg.reference.center[1]};
  if (cfg.reference.kind == ReferenceKind::kCircle) {
    const double phase =
        2.0 * M_PI * static_cast<double>(t) * cfg.dt / cfg.reference.period;
    r[0] += cfg.reference.radius * std::cos(phase);
    r[1] += cfg.reference.radius * std::sin(phase);
  }
  return r;
}

std::string scenario_to_json_text(const ScenarioConfig& cfg) {
  json j;
  j["name"] = cfg.name;
  j["duration"] = cfg.duration;
  j["dt"] = cfg.dt;
  j["reference"] = {
      {"kind", cfg.reference.kind == ReferenceKind::kCircle ? "circle" : "origin"},
      {"radius", cfg.reference.radius},
      {"period", cfg.reference.period},
      {"center", cfg.reference.center},
  };
  j["mpc"] = {
      {"horizon", cfg.mpc.horizon},       {"q_diag", diag_of(cfg.mpc.q_weight)},
      {"r_diag", diag_of(cfg.mpc.r_weight)}, {"u_min", cfg.mpc.u_min},
      {"u_max", cfg.mpc.u_max},           {"y_min", cfg.mpc.y_min},
      {"y_max", cfg.mpc.y_max},           {"slack_weight", cfg.mpc.slack_weight},
  };
  j["bo"] = {
      {"k_max", cfg.bo.k_max},
      {"n_seeds", cfg.bo.n_seeds},
      {"acquisition_budget", cfg.bo.acquisition_budget},
      {"master_seed", cfg.bo.master_seed},
      {"gp_restarts", cfg.bo.gp_restarts},
      {"gp_max_iterations", cfg.bo.gp_max_iterations},
      {"gp_active_set_size", cfg.bo.gp_active_set_size},
  };
  j["plant"] = {
      {"mass", cfg.plant.mass},
      {"stiffness", cfg.plant.stiffness},
      {"cubic_stiffness", cfg.plant.cubic_stiffness},
      {"damping", cfg.plant.damping},
      {"lever", cfg.plant.lever},
      {"noise_std", cfg.plant.noise_std},
      {"substeps", cfg.plant.substeps},
  };
  j["initial_q"] = cfg.initial_q;
  j["model"] = {
      {"n_z", cfg.model_dims.n_z},     {"n_u", cfg.model_dims.n_u},
      {"n_y", cfg.model_dims.n_y},     {"a_bound", cfg.theta_a_bound},
      {"b_bound", cfg.theta_b_bound},
  };
  return j.dump(2) + "\n";
}

ScenarioConfig scenario_from_json_text(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw std::invalid_argument(std::string("config parse error: ") + e.what());
  }
  try {
    ScenarioConfig cfg;
    cfg.name = j.value("name", cfg.name);
    cfg.duration = j.value("duration", cfg.duration);
    cfg.dt = j.value("dt", cfg.dt);
    if (j.contains("reference")) {
      const json& r = j["reference"];
      const std::string kind = r.value("kind", "origin");
      if (kind == "circle") {
        cfg.reference.kind = ReferenceKind::kCircle;
      } else if (kind == "origin") {
        cfg.reference.kind = ReferenceKind::kOrigin;
      } else {
        throw std::invalid_argument("reference.kind must be origin or circle");
      }
      cfg.reference.radius = r.value("radius", cfg.reference.radius);
      cfg.reference.period = r.value("period", cfg.reference.period);
      if (r.contains("center")) cfg.reference.center = r["center"];
    }
    if (j.contains("model")) {
      const json& m = j["model"];
      cfg.model_dims.n_z = m.value("n_z", cfg.model_dims.n_z);
      cfg.model_dims.n_u = m.value("n_u", cfg.model_dims.n_u);
      cfg.model_dims.n_y = m.value("n_y", cfg.model_dims.n_y);
      cfg.theta_a_bound = m.value("a_bound", cfg.theta_a_bound);
      cfg.theta_b_bound = m.value("b_bound", cfg.theta_b_bound);
    }
    cfg.mpc = MpcConfig::defaults(cfg.model_dims.n_u, cfg.model_dims.n_y);
    if (j.contains("mpc")) {
      const json& m = j["mpc"];
      cfg.mpc.horizon = m.value("horizon", cfg.mpc.horizon);
      if (m.contains("q_diag")) cfg.mpc.q_weight = diag_matrix(m["q_diag"].get<Vector>());
      if (m.contains("r_diag")) cfg.mpc.r_weight = diag_matrix(m["r_diag"].get<Vector>());
      if (m.contains("u_min")) cfg.mpc.u_min = m["u_min"].get<Vector>();
      if (m.contains("u_max")) cfg.mpc.u_max = m["u_max"].get<Vector>();
      if (m.contains("y_min")) cfg.mpc.y_min = m["y_min"].get<Vector>();
      if (m.contains("y_max")) cfg.mpc.y_max = m["y_max"].get<Vector>();
      cfg.mpc.slack_weight = m.value("slack_weight", cfg.mpc.slack_weight);
    }
    if (j.contains("bo")) {
      const json& b = j["bo"];
      cfg.bo.k_max = b.value("k_max", cfg.bo.k_max);
      cfg.bo.n_seeds = b.value("n_seeds", cfg.bo.n_seeds);
      cfg.bo.acquisition_budget = b.value("acquisition_budget", cfg.bo.acquisition_budget);
      cfg.bo.master_seed = b.value("master_seed", cfg.bo.master_seed);
      cfg.bo.gp_restarts = b.value("gp_restarts", cfg.bo.gp_restarts);
      cfg.bo.gp_max_iterations = b.value("gp_max_iterations", cfg.bo.gp_max_iterations);
      cfg.bo.gp_active_set_size =
          b.value("gp_active_set_size", cfg.bo.gp_active_set_size);
    }
    if (j.contains("plant")) {
      const json& p = j["plant"];
      cfg.plant.mass = p.value("mass", cfg.plant.mass);
      cfg.plant.stiffness = p.value("stiffness", cfg.plant.stiffness);
      cfg.plant.cubic_stiffness = p.value("cubic_stiffness", cfg.plant.cubic_stiffness);
      cfg.plant.damping = p.value("damping", cfg.plant.damping);
      cfg.plant.lever = p.value("lever", cfg.plant.lever);
      cfg.plant.noise_std = p.value("noise_std", cfg.plant.noise_std);
      cfg.plant.substeps = p.value("substeps", cfg.plant.substeps);
    }
    if (j.contains("initial_q")) cfg.initial_q = j["initial_q"];
    cfg.validate();
    return cfg;
  } catch (const json::exception& e) {
    throw std::invalid_argument(std::string("config field error: ") + e.what());
  }
}

ScenarioConfig load_scenario(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open config file: " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return scenario_from_json_text(buf.str());
}

void save_scenario(const ScenarioConfig& cfg, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write config file: " + path);
  out << scenario_to_json_text(cfg);
}

int run_scenario(const ScenarioConfig& cfg, const std::string& out_dir) {
  try {
    cfg.validate();
  } catch (const std::exception& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 2;
  }
  try {
    std::filesystem::create_directories(out_dir);
    const auto t0 = std::chrono::steady_clock::now();
    const BoRunResult result = run_bo(cfg);
    const double wall_s =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

    const auto path = [&](const char* file) {
      return (std::filesystem::path(out_dir) / file).string();
    };

    {
      std::ofstream csv(path("convergence.csv"));
      csv << "k,J,J_best\n";
      for (std::size_t k = 0; k < result.per_iteration_cost.size(); ++k) {
        csv << (k + 1) << ',' << fmt(result.per_iteration_cost[k]) << ','
            << fmt(result.best_so_far[k]) << '\n';
      }
    }
    {
      std::ofstream csv(path("best_trajectory.csv"));
      csv << "t,y1,y2,r1,r2,u1,u2,u3\n";
      for (const TrajectoryPoint& pt : result.best.trajectory) {
        csv << fmt(pt.time) << ',' << fmt(pt.y[0]) << ',' << fmt(pt.y[1]) << ','
            << fmt(pt.r[0]) << ',' << fmt(pt.r[1]);
        for (double u : pt.u) csv << ',' << fmt(u);
        csv << '\n';
      }
    }
    {
      std::ofstream csv(path("theta_best.csv"));
      const Vector& theta = result.best.theta;
      for (std::size_t i = 0; i < theta.size(); ++i)
        csv << (i ? "," : "") << "theta_" << i;
      csv << '\n';
      for (std::size_t i = 0; i < theta.size(); ++i)
        csv << (i ? "," : "") << fmt(theta[i]);
      csv << '\n';
    }
    {
      std::ofstream log(path("run.log"));
      for (std::size_t k = 0; k < result.per_iteration_cost.size(); ++k) {
        log << "iter " << (k + 1) << "  J = " << fmt(result.per_iteration_cost[k])
            << "  J_best = " << fmt(result.best_so_far[k])
            << (result.state.flagged[k] ? "  [penalty]" : "") << '\n';
      }
    }
    {
      std::ofstream rep(path("report.txt"));
      rep << "scenario: " << cfg.name << '\n';
      rep << "episodes: " << result.state.cost_set.size() << '\n';
      rep << "incumbent cost: " << fmt(result.state.incumbent_cost) << '\n';
      rep << "incumbent iteration: " << (result.state.incumbent_index + 1) << '\n';
      rep << "incumbent flags: blowup=" << result.best.flags.blowup
          << " solver_failure=" << result.best.flags.solver_failure
          << " slack_active=" << result.best.flags.slack_active << '\n';
      if (result.has_hyper) {
        rep << "gp signal_variance: " << fmt(result.final_hyper.signal_variance) << '\n';
        rep << "gp noise_variance: " << fmt(result.final_hyper.noise_variance) << '\n';
        rep << "gp lengthscales:";
        for (double l : result.final_hyper.lengthscales) rep << ' ' << fmt(l);
        rep << '\n';
      }
      rep << "wall_clock_s: " << fmt(wall_s) << '\n';
    }
    return 0;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "runtime failure: %s\n", e.what());
    return 3;
  }
}

}  // namespace mpcbo
