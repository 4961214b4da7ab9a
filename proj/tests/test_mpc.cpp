#include <doctest.h>

#include <cmath>

#include "mpcbo/mpc.hpp"
#include "mpcbo/plant.hpp"
#include "mpcbo/rng.hpp"
#include "test_util.hpp"

using namespace mpcbo;

namespace {

QpProblem simple_qp(const Matrix& h, const Vector& g) {
  QpProblem p;
  p.hessian = h;
  p.gradient = g;
  p.lb.assign(g.size(), -QpProblem::kUnbounded);
  p.ub.assign(g.size(), QpProblem::kUnbounded);
  p.a_in = Matrix(0, g.size());
  return p;
}

}  // namespace

TEST_CASE("unconstrained qp returns the Newton point") {
  const QpSolution s = solve_qp(simple_qp(Matrix{{2.0, 0.0}, {0.0, 4.0}}, {-2.0, -4.0}));
  CHECK(s.status == QpStatus::kOptimal);
  CHECK(s.x[0] == doctest::Approx(1.0).epsilon(1e-10));
  CHECK(s.x[1] == doctest::Approx(1.0).epsilon(1e-10));
}

TEST_CASE("scalar qp clamps to the active bound") {
  QpProblem p = simple_qp(Matrix{{2.0}}, {-1.0});
  // Unconstrained minimizer is 0.5.
  CHECK(solve_qp(p).x[0] == doctest::Approx(0.5).epsilon(1e-12));
  p.ub[0] = 0.3;
  CHECK(solve_qp(p).x[0] == doctest::Approx(0.3).epsilon(1e-12));
  p.ub[0] = QpProblem::kUnbounded;
  p.lb[0] = 0.8;
  CHECK(solve_qp(p).x[0] == doctest::Approx(0.8).epsilon(1e-12));
}

TEST_CASE("box qps match exhaustive active-set enumeration") {
  Rng rng(11);
  for (int trial = 0; trial < 60; ++trial) {
    const std::size_t n = 2 + rng.below(5);  // up to 6 variables
    QpProblem p = simple_qp(testutil::random_spd(n, rng),
                            testutil::random_vector(n, rng, -3.0, 3.0));
    for (std::size_t i = 0; i < n; ++i) {
      p.lb[i] = rng.uniform(-1.0, 0.0);
      p.ub[i] = rng.uniform(0.05, 1.0);
    }
    Vector x_ref;
    const double best = testutil::enumerate_box_qp(p, &x_ref);
    const QpSolution s = solve_qp(p);
    CHECK(s.status == QpStatus::kOptimal);
    for (std::size_t i = 0; i < n; ++i) {
      CHECK(s.x[i] >= p.lb[i] - 1e-9);
      CHECK(s.x[i] <= p.ub[i] + 1e-9);
    }
    CHECK(qp_objective(p, s.x) == doctest::Approx(best).epsilon(1e-9));
    CHECK(norm2(vec_sub(s.x, x_ref)) < 1e-6 * (1.0 + norm2(x_ref)));
  }
}

TEST_CASE("general inequality rows: projection onto a half-space") {
  // min ||x - c||^2 s.t. sum(x) <= b with c strictly violating. The optimum
  // is the Euclidean projection c - ((sum c - b)/n) * 1.
  Rng rng(23);
  for (int trial = 0; trial < 40; ++trial) {
    const std::size_t n = 2 + rng.below(4);
    const Vector c = testutil::random_vector(n, rng, 0.5, 2.0);
    double sum_c = 0.0;
    for (double v : c) sum_c += v;
    const double b = sum_c - rng.uniform(0.5, 2.0);

    QpProblem p = simple_qp(2.0 * Matrix::identity(n), vec_scale(-2.0, c));
    p.a_in = Matrix(1, n);
    for (std::size_t i = 0; i < n; ++i) p.a_in(0, i) = 1.0;
    p.b_in = {b};
    p.x0.assign(n, b / static_cast<double>(n));

    const QpSolution s = solve_qp(p);
    const double shift = (sum_c - b) / static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i) {
      CHECK(s.x[i] == doctest::Approx(c[i] - shift).epsilon(1e-8));
    }
  }
}

TEST_CASE("condensed qp objective matches a direct rollout cost") {
  Matrix a{{0.7, 0.15}, {-0.1, 0.8}};
  Matrix b{{0.3, 0.0, -0.2}, {0.1, 0.25, 0.0}};
  PredictionModel m = make_model(a, b, 2);
  m.z = {0.02, -0.04};

  MpcConfig cfg = MpcConfig::defaults();
  cfg.horizon = 6;
  std::vector<Vector> ref(cfg.horizon, Vector{0.03, -0.02});
  const QpProblem qp = build_qp(m, cfg, ref);
  REQUIRE(qp.gradient.size() == cfg.horizon * (3 + 2));
  REQUIRE(qp.n_inputs == 18);
  REQUIRE(qp.n_slack == 12);

  // Differences of the QP objective between two candidates must equal the
  // differences of the explicitly rolled-out tracking cost, which pins down
  // both the Hessian and the gradient up to the dropped constant.
  Rng rng(3);
  auto direct_cost = [&](const Vector& x) {
    std::vector<Vector> u_seq;
    for (std::size_t t = 0; t < cfg.horizon; ++t) {
      u_seq.push_back({x[t * 3], x[t * 3 + 1], x[t * 3 + 2]});
    }
    const auto y = rollout(m, u_seq);
    double j = 0.0;
    for (std::size_t t = 0; t < cfg.horizon; ++t) {
      const Vector e = vec_sub(y[t], ref[t]);
      j += dot(e, matvec(cfg.q_weight, e));
      j += dot(u_seq[t], matvec(cfg.r_weight, u_seq[t]));
      for (std::size_t r = 0; r < 2; ++r) {
        const double s = x[qp.n_inputs + t * 2 + r];
        j += cfg.slack_weight * s * s;
      }
    }
    return j;
  };

  const Vector x_a = testutil::random_vector(qp.gradient.size(), rng, -0.5, 0.5);
  for (int rep = 0; rep < 10; ++rep) {
    const Vector x_b = testutil::random_vector(qp.gradient.size(), rng, -0.5, 0.5);
    const double lhs = qp_objective(qp, x_b) - qp_objective(qp, x_a);
    const double rhs = direct_cost(x_b) - direct_cost(x_a);
    CHECK(lhs == doctest::Approx(rhs).epsilon(1e-8));
  }
}

TEST_CASE("build_qp start point is feasible") {
  Matrix a{{0.9, 0.3}, {0.0, 0.9}};
  Matrix b{{0.2, 0.1, 0.0}, {0.0, 0.3, 0.2}};
  PredictionModel m = make_model(a, b, 2);
  m.z = {0.4, 0.4};  // large initial state: outputs start outside the band
  MpcConfig cfg = MpcConfig::defaults();
  const QpProblem qp = build_qp(m, cfg, std::vector<Vector>(cfg.horizon, Vector(2, 0.0)));
  for (std::size_t i = 0; i < qp.gradient.size(); ++i) {
    CHECK(qp.x0[i] >= qp.lb[i] - 1e-12);
    CHECK(qp.x0[i] <= qp.ub[i] + 1e-12);
  }
  for (std::size_t i = 0; i < qp.a_in.rows(); ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < qp.gradient.size(); ++j) s += qp.a_in(i, j) * qp.x0[j];
    CHECK(s <= qp.b_in[i] + 1e-9);
  }
}

TEST_CASE("build_qp rejects a nonzero direct feedthrough") {
  PredictionModel m = make_model(Matrix(2, 2), Matrix(2, 3), 2);
  m.d(0, 0) = 0.5;
  MpcConfig cfg = MpcConfig::defaults();
  CHECK_THROWS_AS(build_qp(m, cfg, std::vector<Vector>(cfg.horizon, Vector(2, 0.0))),
                  DimensionMismatch);
}

TEST_CASE("mpc regulates the linearized plant to a setpoint") {
  SoftRodPlant plant;
  plant.cubic_stiffness = 0.0;
  plant.noise_std = 0.0;
  const double dt = 0.05;
  PredictionModel model = testutil::linearized_plant_model(plant, dt);
  MpcConfig cfg = MpcConfig::defaults();

  const Vector ref{0.05, 0.0};
  std::vector<Vector> window(cfg.horizon, ref);
  PlantState s;
  Vector u_prev(3, 0.0);
  Rng rng(1);
  double final_err = 1.0;
  for (int t = 0; t < 80; ++t) {  // 4 s
    const Vector y = plant_output(plant, s, rng);
    const MpcStepResult step = mpc_step(model, cfg, window, y, u_prev);
    REQUIRE_FALSE(step.solver_failed);
    for (std::size_t i = 0; i < 3; ++i) {
      CHECK(step.u[i] >= cfg.u_min[i] - 1e-12);
      CHECK(step.u[i] <= cfg.u_max[i] + 1e-12);
    }
    s = plant_step(plant, s, step.u, dt);
    u_prev = step.u;
    final_err = std::hypot(s.q[0] - ref[0], s.q[1] - ref[1]);
  }
  CHECK(final_err < 2e-3);
}

TEST_CASE("soft output constraints hold the plant near the band edge") {
  SoftRodPlant plant;
  plant.cubic_stiffness = 0.0;
  plant.noise_std = 0.0;
  const double dt = 0.05;
  PredictionModel model = testutil::linearized_plant_model(plant, dt);
  MpcConfig cfg = MpcConfig::defaults();

  // Reference well beyond the +/-0.1 m output band.
  std::vector<Vector> window(cfg.horizon, Vector{0.25, 0.0});
  PlantState s;
  Vector u_prev(3, 0.0);
  Rng rng(1);
  double y_peak = 0.0;
  for (int t = 0; t < 80; ++t) {
    const Vector y{s.q[0], s.q[1]};
    const MpcStepResult step = mpc_step(model, cfg, window, y, u_prev);
    REQUIRE_FALSE(step.solver_failed);
    s = plant_step(plant, s, step.u, dt);
    u_prev = step.u;
    y_peak = std::max(y_peak, s.q[0]);
  }
  CHECK(y_peak <= 0.105);          // at most a sliver past the softened bound
  CHECK(s.q[0] > 0.09);            // but pushed right up against it
  CHECK(std::abs(s.q[1]) < 5e-3);
}

TEST_CASE("scaling Q and R together leaves the interior solution unchanged") {
  Matrix a{{0.6, 0.1}, {0.0, 0.7}};
  Matrix b{{0.4, 0.0, 0.1}, {0.0, 0.4, -0.1}};
  PredictionModel m = make_model(a, b, 2);
  m.z = {0.01, 0.005};
  MpcConfig cfg = MpcConfig::defaults();
  std::vector<Vector> ref(cfg.horizon, Vector{0.02, 0.01});

  const QpSolution s1 = solve_qp(build_qp(m, cfg, ref));
  MpcConfig scaled = cfg;
  scaled.q_weight = 7.0 * cfg.q_weight;
  scaled.r_weight = 7.0 * cfg.r_weight;
  const QpSolution s2 = solve_qp(build_qp(m, scaled, ref));
  // Interior problem (no active slack, no active bound) so the argmin only
  // depends on the Q/R ratio.
  for (std::size_t i = 0; i < 6; ++i) {
    CHECK(s1.x[i] == doctest::Approx(s2.x[i]).epsilon(1e-7));
  }
}

TEST_CASE("mpc_step reports failure instead of throwing") {
  PredictionModel m = make_model(Matrix{{0.5}}, Matrix{{1.0}}, 1);
  MpcConfig cfg = MpcConfig::defaults(1, 1);
  // Wrong-size reference window forces a build failure inside mpc_step.
  const MpcStepResult r = mpc_step(m, cfg, {}, {0.0}, {0.0});
  CHECK(r.solver_failed);
  CHECK(r.u == Vector(1, 0.0));
}
