#ifndef MPCBO_BO_HPP
#define MPCBO_BO_HPP

#include <cstdint>
#include <functional>
#include <vector>

#include "mpcbo/gp.hpp"
#include "mpcbo/matrix.hpp"
#include "mpcbo/scenario.hpp"

namespace mpcbo {

struct EvaluationFlags {
  bool blowup = false;
  bool solver_failure = false;
  bool slack_active = false;

  bool failed() const { return blowup || solver_failure; }
};

struct TrajectoryPoint {
  double time = 0.0;
  Vector y;       // measured output
  Vector u;       // applied input
  Vector r;       // reference
  Vector q_true;  // noise-free plant position (diagnostic)
};

struct EvaluationRecord {
  Vector theta;
  double cost = 0.0;
  std::vector<TrajectoryPoint> trajectory;
  EvaluationFlags flags;
};

struct BoState {
  std::vector<Vector> theta_set;
  Vector cost_set;
  std::vector<bool> flagged;
  std::size_t incumbent_index = 0;
  double incumbent_cost = 0.0;
};

struct BoObservation {
  double cost = 0.0;
  bool flagged = false;
};

/// Objective under minimization; eval_index identifies the episode for seed
/// derivation so results do not depend on evaluation order.
using BoObjective =
    std::function<BoObservation(const Vector& theta, std::size_t eval_index)>;

struct BoOptions {
  std::size_t k_max = 100;
  std::size_t n_seeds = 10;
  std::size_t acquisition_budget = 4096;
  std::uint64_t seed = 1;
  GpFitOptions gp;
  std::function<void(std::size_t k, double cost, double best, bool flag)> progress;
};

/// Latin hypercube over [lower, upper]: one sample per stratum in every
/// dimension, strata permuted independently.
std::vector<Vector> seed_design(std::size_t n_seeds, const Vector& lower,
                                const Vector& upper, std::uint64_t seed);

/// EI for minimization: E[max(0, j_best - Y)] with Y ~ N(mean, variance)
/// from the GP posterior at x.
double expected_improvement(const GpModel& model, const Vector& x, double j_best);

/// Quasi-random probing plus per-coordinate pattern-search refinement of the
/// 5 best probes; operates on the normalized unit box, optionally restricted
/// to the sub-box [box_lo, box_hi]. When `start` is given (normalized
/// coordinates) it is refined as an extra exploitation seed.
Vector optimize_acquisition(const GpModel& model, double j_best, std::size_t dim,
                            std::size_t budget, std::uint64_t seed,
                            const Vector* start = nullptr,
                            const Vector* box_lo = nullptr,
                            const Vector* box_hi = nullptr);

/// Generic BO loop (seed design, GP fit, EI argmax, evaluate, augment).
BoState bo_minimize(const BoObjective& objective, const Vector& lower,
                    const Vector& upper, const BoOptions& options);

/// One closed-loop episode: decode theta, run observer -> MPC -> plant for
/// N steps, accumulate the weighted tracking cost. Failures are flagged and
/// cost left at the raw accumulated value; the BO loop substitutes the
/// penalty.
EvaluationRecord evaluate_theta(const Vector& theta, const ScenarioConfig& scenario,
                                std::uint64_t seed);

struct BoRunResult {
  BoState state;
  EvaluationRecord best;
  std::vector<double> per_iteration_cost;
  std::vector<double> best_so_far;
  GpHyperparams final_hyper;
  bool has_hyper = false;
};

BoRunResult run_bo(const ScenarioConfig& scenario);

}  // namespace mpcbo

#endif
