#include "mpcbo/bo.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>

#include "mpcbo/numerics.hpp"
#include "mpcbo/rng.hpp"

namespace mpcbo {

std::vector<Vector> seed_design(std::size_t n_seeds, const Vector& lower,
                                const Vector& upper, std::uint64_t seed) {
  if (n_seeds == 0) return {};
  if (lower.size() != upper.size()) throw DimensionMismatch("seed_design bounds mismatch");
  const std::size_t dim = lower.size();
  Rng rng(seed);
  std::vector<Vector> points(n_seeds, Vector(dim, 0.0));
  std::vector<std::size_t> perm(n_seeds);
  for (std::size_t d = 0; d < dim; ++d) {
    std::iota(perm.begin(), perm.end(), 0);
    for (std::size_t i = n_seeds - 1; i > 0; --i) {
      const std::size_t j = rng.below(i + 1);
      std::swap(perm[i], perm[j]);
    }
    for (std::size_t i = 0; i < n_seeds; ++i) {
      const double stratum = (static_cast<double>(perm[i]) + rng.uniform()) /
                             static_cast<double>(n_seeds);
      points[i][d] = lower[d] + stratum * (upper[d] - lower[d]);
    }
  }
  return points;
}

double expected_improvement(const GpModel& model, const Vector& x, double j_best) {
  const GpModel::Prediction p = model.predict(x);
  const double sigma = std::sqrt(std::max(0.0, p.variance));
  const double gap = j_best - p.mean;
  if (sigma <= 1e-12) return std::max(0.0, gap);
  const double z = gap / sigma;
  return gap * norm_cdf(z) + sigma * norm_pdf(z);
}

namespace {

constexpr int kHaltonPrimes[] = {2,  3,  5,  7,  11, 13, 17, 19, 23, 29,
                                 31, 37, 41, 43, 47, 53, 59, 61, 67, 71};

double radical_inverse(std::uint64_t index, int base) {
  double inv_base = 1.0 / base;
  double factor = inv_base;
  double result = 0.0;
  while (index > 0) {
    result += static_cast<double>(index % static_cast<std::uint64_t>(base)) * factor;
    index /= static_cast<std::uint64_t>(base);
    factor *= inv_base;
  }
  return result;
}

}  // namespace

Vector optimize_acquisition(const GpModel& model, double j_best, std::size_t dim,
                            std::size_t budget, std::uint64_t seed,
                            const Vector* start, const Vector* box_lo,
                            const Vector* box_hi) {
  if (dim > sizeof(kHaltonPrimes) / sizeof(kHaltonPrimes[0])) {
    throw DimensionMismatch("acquisition dimension beyond the Halton base table");
  }
  Vector lo(dim, 0.0), hi(dim, 1.0);
  if (box_lo != nullptr && box_lo->size() == dim) lo = *box_lo;
  if (box_hi != nullptr && box_hi->size() == dim) hi = *box_hi;
  for (std::size_t d = 0; d < dim; ++d) {
    lo[d] = std::clamp(lo[d], 0.0, 1.0);
    hi[d] = std::clamp(hi[d], lo[d], 1.0);
  }

  Rng rng(seed);
  Vector shift(dim);
  for (std::size_t d = 0; d < dim; ++d) shift[d] = rng.uniform();

  std::vector<Vector> probes(budget, Vector(dim, 0.0));
  Vector values(budget, 0.0);
  const long long b = static_cast<long long>(budget);
#pragma omp parallel for schedule(static) if (b > 127)
  for (long long i = 0; i < b; ++i) {
    Vector& x = probes[i];
    for (std::size_t d = 0; d < dim; ++d) {
      const double h =
          radical_inverse(static_cast<std::uint64_t>(i) + 1, kHaltonPrimes[d]) +
          shift[d];
      x[d] = lo[d] + (hi[d] - lo[d]) * (h - std::floor(h));
    }
    values[i] = expected_improvement(model, x, j_best);
  }

  // Pick the 5 best probes for local refinement.
  std::vector<std::size_t> order(budget);
  std::iota(order.begin(), order.end(), 0);
  const std::size_t n_refine = std::min<std::size_t>(5, budget);
  std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_refine),
                    order.end(),
                    [&](std::size_t a, std::size_t c) { return values[a] > values[c]; });

  Vector best_x = probes[order[0]];
  double best_v = values[order[0]];

  const auto refine = [&](Vector x, double v) {
    double step = 0.1;
    for (int it = 0; it < 100 && step >= 1e-4; ++it) {
      double trial_best = v;
      Vector trial_x = x;
      for (std::size_t d = 0; d < dim; ++d) {
        for (double dir : {+1.0, -1.0}) {
          Vector cand = x;
          cand[d] = std::clamp(cand[d] + dir * step, lo[d], hi[d]);
          const double cv = expected_improvement(model, cand, j_best);
          if (cv > trial_best) {
            trial_best = cv;
            trial_x = cand;
          }
        }
      }
      if (trial_best > v) {
        v = trial_best;
        x = trial_x;
      } else {
        step *= 0.5;
      }
    }
    if (v > best_v) {
      best_v = v;
      best_x = x;
    }
  };

  for (std::size_t s = 0; s < n_refine; ++s) refine(probes[order[s]], values[order[s]]);
  if (start != nullptr && start->size() == dim) {
    // Exploitation start: polish around the current best design as well.
    Vector s0 = *start;
    for (std::size_t d = 0; d < dim; ++d) s0[d] = std::clamp(s0[d], lo[d], hi[d]);
    refine(s0, expected_improvement(model, s0, j_best));
  }
  return best_x;
}

namespace {

double penalty_cost(double worst_finite, bool has_finite) {
  return has_finite ? 10.0 * std::abs(worst_finite) : 1e9;
}

void update_incumbent(BoState& state) {
  // A flagged evaluation only becomes the incumbent when everything is
  // flagged.
  std::size_t best = state.cost_set.size();
  for (std::size_t i = 0; i < state.cost_set.size(); ++i) {
    if (state.flagged[i]) continue;
    if (best == state.cost_set.size() || state.cost_set[i] < state.cost_set[best]) {
      best = i;
    }
  }
  if (best == state.cost_set.size()) {
    best = 0;
    for (std::size_t i = 1; i < state.cost_set.size(); ++i)
      if (state.cost_set[i] < state.cost_set[best]) best = i;
  }
  state.incumbent_index = best;
  state.incumbent_cost = state.cost_set[best];
}

}  // namespace

BoState bo_minimize(const BoObjective& objective, const Vector& lower,
                    const Vector& upper, const BoOptions& options) {
  if (lower.size() != upper.size() || lower.empty()) {
    throw DimensionMismatch("bo_minimize bounds mismatch");
  }
  const std::size_t dim = lower.size();
  const std::size_t n_seeds = std::min(options.n_seeds, options.k_max);
  Vector range(dim);
  for (std::size_t d = 0; d < dim; ++d) range[d] = upper[d] - lower[d];

  BoState state;
  state.theta_set =
      seed_design(n_seeds, lower, upper, derive_seed(options.seed, 0x5EEDULL));
  state.cost_set.assign(n_seeds, 0.0);
  state.flagged.assign(n_seeds, false);

  std::vector<BoObservation> seed_obs(n_seeds);
  const long long ns = static_cast<long long>(n_seeds);
#pragma omp parallel for schedule(dynamic) if (ns > 1)
  for (long long i = 0; i < ns; ++i) {
    seed_obs[i] = objective(state.theta_set[i], static_cast<std::size_t>(i));
  }

  double worst_finite = -std::numeric_limits<double>::infinity();
  bool has_finite = false;
  for (std::size_t i = 0; i < n_seeds; ++i) {
    if (!seed_obs[i].flagged && std::isfinite(seed_obs[i].cost)) {
      worst_finite = std::max(worst_finite, seed_obs[i].cost);
      has_finite = true;
    }
  }
  for (std::size_t i = 0; i < n_seeds; ++i) {
    const bool bad = seed_obs[i].flagged || !std::isfinite(seed_obs[i].cost);
    state.flagged[i] = bad;
    state.cost_set[i] = bad ? penalty_cost(worst_finite, has_finite) : seed_obs[i].cost;
  }
  update_incumbent(state);
  if (options.progress) {
    for (std::size_t i = 0; i < n_seeds; ++i) {
      double best = state.cost_set[i];
      for (std::size_t j = 0; j <= i; ++j) best = std::min(best, state.cost_set[j]);
      options.progress(i + 1, state.cost_set[i], best, state.flagged[i]);
    }
  }

  // Adaptive trust region around the incumbent (normalized units). Plain EI
  // over the whole box stalls in ten dimensions within a 100-episode budget;
  // shrinking the candidate box onto the incumbent after failed iterations
  // recovers local convergence while successes re-expand it.
  double trust = 0.5;
  int fail_streak = 0;

  for (std::size_t k = n_seeds; k < options.k_max; ++k) {
    // Normalize inputs to the unit box for the GP.
    std::vector<Vector> xs(state.theta_set.size(), Vector(dim, 0.0));
    for (std::size_t i = 0; i < xs.size(); ++i)
      for (std::size_t d = 0; d < dim; ++d)
        xs[i][d] = (state.theta_set[i][d] - lower[d]) / range[d];

    Vector next_norm;
    try {
      GpFitOptions gp = options.gp;
      gp.seed = derive_seed(options.seed, 0xA000ULL + k);
      // Closed-loop costs span several orders of magnitude; the GP models the
      // log-compressed landscape far better. The warp is monotone, so EI in
      // warped space still targets the same minimizer.
      double lo = state.cost_set[0], hi = state.cost_set[0];
      for (double c : state.cost_set) {
        lo = std::min(lo, c);
        hi = std::max(hi, c);
      }
      const double shift = std::max(1e-9, 1e-3 * (hi - lo));
      Vector warped(state.cost_set.size());
      for (std::size_t i = 0; i < warped.size(); ++i) {
        warped[i] = std::log(state.cost_set[i] - lo + shift);
      }
      const GpModel model = GpModel::fit(xs, warped, gp);
      const double j_best_warped = std::log(state.incumbent_cost - lo + shift);
      const Vector& incumbent_norm = xs[state.incumbent_index];
      Vector box_lo(dim), box_hi(dim);
      for (std::size_t d = 0; d < dim; ++d) {
        box_lo[d] = incumbent_norm[d] - trust;
        box_hi[d] = incumbent_norm[d] + trust;
      }
      next_norm = optimize_acquisition(model, j_best_warped, dim,
                                       options.acquisition_budget,
                                       derive_seed(options.seed, 0xC000ULL + k),
                                       &incumbent_norm, &box_lo, &box_hi);
    } catch (const NotPositiveDefinite&) {
      Rng rng(derive_seed(options.seed, 0xE000ULL + k));
      next_norm.assign(dim, 0.0);
      for (std::size_t d = 0; d < dim; ++d) next_norm[d] = rng.uniform();
    }

    Vector theta(dim);
    for (std::size_t d = 0; d < dim; ++d) theta[d] = lower[d] + range[d] * next_norm[d];

    const BoObservation obs = objective(theta, k);
    const bool bad = obs.flagged || !std::isfinite(obs.cost);
    const double cost = bad ? penalty_cost(worst_finite, has_finite) : obs.cost;
    if (!bad) {
      worst_finite = std::max(worst_finite, obs.cost);
      has_finite = true;
    }
    state.theta_set.push_back(theta);
    state.cost_set.push_back(cost);
    state.flagged.push_back(bad);
    const double prev_best = state.incumbent_cost;
    update_incumbent(state);
    if (state.incumbent_cost < prev_best) {
      trust = std::min(0.5, trust * 1.6);
      fail_streak = 0;
    } else if (++fail_streak >= 4) {
      trust = std::max(0.05, trust * 0.5);
      fail_streak = 0;
    }
    if (options.progress) {
      options.progress(k + 1, cost, state.incumbent_cost, bad);
    }
  }
  return state;
}

EvaluationRecord evaluate_theta(const Vector& theta, const ScenarioConfig& scenario,
                                std::uint64_t seed) {
  EvaluationRecord record;
  record.theta = theta;

  ThetaVector tv;
  tv.values = theta;
  tv.bounds = ThetaBounds::for_dims(scenario.model_dims, scenario.theta_a_bound,
                                    scenario.theta_b_bound);
  PredictionModel model = decode_theta(tv, scenario.model_dims);

  SoftRodPlant plant = scenario.plant;
  PlantState state;
  state.q = scenario.initial_q;
  Rng rng(seed);

  const std::size_t n_steps = scenario.steps();
  const std::size_t horizon = scenario.mpc.horizon;
  const std::size_t n_u = scenario.model_dims.n_u;
  Vector u_prev(n_u, 0.0);
  double cost = 0.0;
  record.trajectory.reserve(n_steps);

  for (std::size_t t = 1; t <= n_steps; ++t) {
    const Vector y = plant_output(plant, state, rng);
    std::vector<Vector> window(horizon);
    for (std::size_t i = 0; i < horizon; ++i) window[i] = reference_at(scenario, t + i);
    const Vector& r = window[0];

    const MpcStepResult step = mpc_step(model, scenario.mpc, window, y, u_prev);
    if (step.solver_failed) {
      record.flags.solver_failure = true;
      break;
    }
    if (step.max_slack > 1e-6) record.flags.slack_active = true;

    const Vector err = vec_sub(y, r);
    cost += dot(err, matvec(scenario.mpc.q_weight, err));
    cost += dot(step.u, matvec(scenario.mpc.r_weight, step.u));

    TrajectoryPoint pt;
    pt.time = static_cast<double>(t) * scenario.dt;
    pt.y = y;
    pt.u = step.u;
    pt.r = r;
    pt.q_true = {state.q[0], state.q[1]};
    record.trajectory.push_back(std::move(pt));

    try {
      state = plant_step(plant, state, step.u, scenario.dt);
    } catch (const NonFiniteState&) {
      record.flags.blowup = true;
      break;
    }
    if (std::abs(state.q[0]) > 1e3 || std::abs(state.q[1]) > 1e3) {
      record.flags.blowup = true;
      break;
    }
    u_prev = step.u;
  }
  if (!std::isfinite(cost)) record.flags.blowup = true;
  record.cost = cost;
  return record;
}

BoRunResult run_bo(const ScenarioConfig& scenario) {
  BoRunResult result;
  const ThetaBounds bounds = ThetaBounds::for_dims(
      scenario.model_dims, scenario.theta_a_bound, scenario.theta_b_bound);

  BoOptions options;
  options.k_max = scenario.bo.k_max;
  options.n_seeds = scenario.bo.n_seeds;
  options.acquisition_budget = scenario.bo.acquisition_budget;
  options.seed = scenario.bo.master_seed;
  options.gp.restarts = scenario.bo.gp_restarts;
  options.gp.max_iterations = scenario.bo.gp_max_iterations;
  options.gp.active_set_size = scenario.bo.gp_active_set_size;
  options.progress = [&](std::size_t k, double cost, double best, bool flag) {
    result.per_iteration_cost.push_back(cost);
    result.best_so_far.push_back(best);
    std::printf("iter %3zu  J = %.9g  J_best = %.9g%s\n", k, cost, best,
                flag ? "  [penalty]" : "");
    std::fflush(stdout);
  };

  const BoObjective objective = [&](const Vector& theta, std::size_t eval_index) {
    const EvaluationRecord rec = evaluate_theta(
        theta, scenario, derive_seed(scenario.bo.master_seed, 0xEE0000ULL + eval_index));
    return BoObservation{rec.cost, rec.flags.failed()};
  };

  result.state = bo_minimize(objective, bounds.lower, bounds.upper, options);

  // Deterministic re-run of the incumbent episode recovers its trajectory.
  const std::size_t best_idx = result.state.incumbent_index;
  result.best = evaluate_theta(
      result.state.theta_set[best_idx], scenario,
      derive_seed(scenario.bo.master_seed, 0xEE0000ULL + best_idx));
  result.best.cost = result.state.cost_set[best_idx];

  if (result.state.theta_set.size() >= 2) {
    const std::size_t dim = bounds.size();
    std::vector<Vector> xs(result.state.theta_set.size(), Vector(dim, 0.0));
    for (std::size_t i = 0; i < xs.size(); ++i)
      for (std::size_t d = 0; d < dim; ++d)
        xs[i][d] = (result.state.theta_set[i][d] - bounds.lower[d]) /
                   (bounds.upper[d] - bounds.lower[d]);
    try {
      GpFitOptions gp;
      gp.restarts = scenario.bo.gp_restarts;
      gp.max_iterations = scenario.bo.gp_max_iterations;
      gp.active_set_size = scenario.bo.gp_active_set_size;
      gp.seed = derive_seed(scenario.bo.master_seed, 0xA000ULL + scenario.bo.k_max);
      result.final_hyper = GpModel::fit(xs, result.state.cost_set, gp).hyper();
      result.has_hyper = true;
    } catch (const NotPositiveDefinite&) {
      result.has_hyper = false;
    }
  }
  return result;
}

}  // namespace mpcbo
