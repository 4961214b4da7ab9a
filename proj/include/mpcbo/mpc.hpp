#ifndef MPCBO_MPC_HPP
#define MPCBO_MPC_HPP

#include <cstddef>
#include <vector>

#include "mpcbo/matrix.hpp"
#include "mpcbo/predmodel.hpp"

namespace mpcbo {

struct MpcConfig {
  std::size_t horizon = 10;  // prediction horizon T_p
  Matrix q_weight;           // n_y x n_y, PSD
  Matrix r_weight;           // n_u x n_u, PD
  Vector u_min;              // n_u
  Vector u_max;              // n_u
  Vector y_min;              // n_y
  Vector y_max;              // n_y
  double slack_weight = 1e6;

  static MpcConfig defaults(std::size_t n_u = 3, std::size_t n_y = 2);
  void validate() const;
};

/// Condensed QP: min 1/2 x^T H x + g^T x over x = [u_stack; slack], subject
/// to per-variable box bounds and general rows a_in x <= b_in. Bounds at
/// magnitude >= kUnbounded are treated as absent.
struct QpProblem {
  static constexpr double kUnbounded = 1e29;

  Matrix hessian;
  Vector gradient;
  Vector lb;
  Vector ub;
  Matrix a_in;  // 0 x n when there are no general rows
  Vector b_in;
  Vector x0;    // feasible start (required when a_in has rows)
  std::size_t n_inputs = 0;
  std::size_t n_slack = 0;
};

enum class QpStatus { kOptimal, kMaxIterations };

struct QpSolution {
  Vector x;
  QpStatus status = QpStatus::kOptimal;
  int iterations = 0;
};

QpProblem build_qp(const PredictionModel& m, const MpcConfig& cfg,
                   const std::vector<Vector>& ref_window);

/// Primal active-set method for strictly convex QPs. Throws MaxIterations on
/// cycling; the MPC layer retries once with a diagonal ridge.
QpSolution solve_qp(const QpProblem& p);

double qp_objective(const QpProblem& p, const Vector& x);

struct MpcStepResult {
  Vector u;
  bool solver_failed = false;
  double max_slack = 0.0;
};

/// One receding-horizon step: observer update with (u_prev, y_meas), QP
/// build and solve, first input block returned clipped to the input box.
MpcStepResult mpc_step(PredictionModel& m, const MpcConfig& cfg,
                       const std::vector<Vector>& ref_window, const Vector& y_meas,
                       const Vector& u_prev);

}  // namespace mpcbo

#endif
