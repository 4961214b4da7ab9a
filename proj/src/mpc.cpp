#include "mpcbo/mpc.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "mpcbo/numerics.hpp"

namespace mpcbo {

MpcConfig MpcConfig::defaults(std::size_t n_u, std::size_t n_y) {
  MpcConfig cfg;
  cfg.q_weight = 1000.0 * Matrix::identity(n_y);
  cfg.r_weight = Matrix::identity(n_u);
  cfg.u_min.assign(n_u, -10.0);
  cfg.u_max.assign(n_u, 10.0);
  cfg.y_min.assign(n_y, -0.1);
  cfg.y_max.assign(n_y, 0.1);
  return cfg;
}

void MpcConfig::validate() const {
  if (horizon == 0) throw DimensionMismatch("horizon must be positive");
  if (u_min.size() != u_max.size() || y_min.size() != y_max.size()) {
    throw DimensionMismatch("bound vector sizes differ");
  }
  for (std::size_t i = 0; i < u_min.size(); ++i)
    if (!(u_min[i] < u_max[i])) throw DimensionMismatch("u_min must be < u_max");
  for (std::size_t i = 0; i < y_min.size(); ++i)
    if (!(y_min[i] < y_max[i])) throw DimensionMismatch("y_min must be < y_max");
  if (!(slack_weight > 0.0)) throw DimensionMismatch("slack_weight must be > 0");
}

QpProblem build_qp(const PredictionModel& m, const MpcConfig& cfg,
                   const std::vector<Vector>& ref_window) {
  const std::size_t n_z = m.a.rows();
  const std::size_t n_u = m.b.cols();
  const std::size_t n_y = m.c.rows();
  const std::size_t T = cfg.horizon;
  if (ref_window.size() != T) throw DimensionMismatch("reference window length != horizon");
  for (const auto& r : ref_window)
    if (r.size() != n_y) throw DimensionMismatch("reference dimension mismatch");
  for (double v : m.d.data())
    if (v != 0.0) throw DimensionMismatch("condensed QP assumes D = 0");

  const std::size_t nu_tot = n_u * T;
  const std::size_t ns = n_y * T;
  const std::size_t n = nu_tot + ns;

  // Output response blocks: phi_k = C A^k z0, impulse[i] = C A^i B.
  std::vector<Matrix> impulse(T);
  Matrix ca = m.c;  // C A^i as i grows
  Vector az = m.z;  // A^k z0
  Vector phi(n_y * T, 0.0);
  for (std::size_t i = 0; i < T; ++i) {
    impulse[i] = matmul(ca, m.b);
    ca = matmul(ca, m.a);
    az = matvec(m.a, az);
    const Vector yk = matvec(m.c, az);  // C A^{i+1} z0
    for (std::size_t r = 0; r < n_y; ++r) phi[i * n_y + r] = yk[r];
  }

  // Gamma: block (k, j) = impulse[k-1-j], rows k = 1..T, cols j = 0..k-1.
  Matrix gamma(n_y * T, nu_tot);
  for (std::size_t k = 1; k <= T; ++k) {
    for (std::size_t j = 0; j < k; ++j) {
      const Matrix& blk = impulse[k - 1 - j];
      for (std::size_t r = 0; r < n_y; ++r)
        for (std::size_t c = 0; c < n_u; ++c)
          gamma((k - 1) * n_y + r, j * n_u + c) = blk(r, c);
    }
  }

  // Q-weighted response: (Qbar Gamma) and the tracking error offset.
  Matrix qgamma(n_y * T, nu_tot);
  Vector err0(n_y * T);
  for (std::size_t k = 0; k < T; ++k) {
    for (std::size_t r = 0; r < n_y; ++r) {
      for (std::size_t c = 0; c < nu_tot; ++c) {
        double s = 0.0;
        for (std::size_t r2 = 0; r2 < n_y; ++r2)
          s += cfg.q_weight(r, r2) * gamma(k * n_y + r2, c);
        qgamma(k * n_y + r, c) = s;
      }
      double e = 0.0;
      for (std::size_t r2 = 0; r2 < n_y; ++r2)
        e += cfg.q_weight(r, r2) * (phi[k * n_y + r2] - ref_window[k][r2]);
      err0[k * n_y + r] = e;  // Q (phi - r), row-weighted
    }
  }

  QpProblem qp;
  qp.n_inputs = nu_tot;
  qp.n_slack = ns;
  qp.hessian = Matrix(n, n);
  qp.gradient.assign(n, 0.0);

  const Matrix gtqg = matmul(gamma.transposed(), qgamma);
  for (std::size_t i = 0; i < nu_tot; ++i)
    for (std::size_t j = 0; j < nu_tot; ++j) qp.hessian(i, j) = 2.0 * gtqg(i, j);
  for (std::size_t k = 0; k < T; ++k)
    for (std::size_t r = 0; r < n_u; ++r)
      for (std::size_t c = 0; c < n_u; ++c)
        qp.hessian(k * n_u + r, k * n_u + c) += 2.0 * cfg.r_weight(r, c);
  for (std::size_t i = 0; i < ns; ++i)
    qp.hessian(nu_tot + i, nu_tot + i) = 2.0 * cfg.slack_weight;

  // gradient over u: 2 Gamma^T Q (phi - r)
  for (std::size_t c = 0; c < nu_tot; ++c) {
    double s = 0.0;
    for (std::size_t k = 0; k < n_y * T; ++k) s += gamma(k, c) * err0[k];
    qp.gradient[c] = 2.0 * s;
  }

  qp.lb.assign(n, -QpProblem::kUnbounded);
  qp.ub.assign(n, QpProblem::kUnbounded);
  for (std::size_t k = 0; k < T; ++k) {
    for (std::size_t c = 0; c < n_u; ++c) {
      qp.lb[k * n_u + c] = cfg.u_min[c];
      qp.ub[k * n_u + c] = cfg.u_max[c];
    }
  }
  for (std::size_t i = 0; i < ns; ++i) qp.lb[nu_tot + i] = 0.0;

  // Softened output rows: +/- (Gamma u) - s_{k,r} <= +/- bound -/+ phi.
  qp.a_in = Matrix(2 * ns, n);
  qp.b_in.assign(2 * ns, 0.0);
  for (std::size_t k = 0; k < T; ++k) {
    for (std::size_t r = 0; r < n_y; ++r) {
      const std::size_t out = k * n_y + r;
      for (std::size_t c = 0; c < nu_tot; ++c) {
        qp.a_in(2 * out, c) = gamma(out, c);
        qp.a_in(2 * out + 1, c) = -gamma(out, c);
      }
      qp.a_in(2 * out, nu_tot + out) = -1.0;
      qp.a_in(2 * out + 1, nu_tot + out) = -1.0;
      qp.b_in[2 * out] = cfg.y_max[r] - phi[out];
      qp.b_in[2 * out + 1] = phi[out] - cfg.y_min[r];
    }
  }

  // Feasible start: zero input clamped to the box, slacks absorbing any
  // initial output violation.
  qp.x0.assign(n, 0.0);
  for (std::size_t i = 0; i < nu_tot; ++i)
    qp.x0[i] = std::clamp(0.0, qp.lb[i], qp.ub[i]);
  Vector row_val(2 * ns, 0.0);
  for (std::size_t i = 0; i < 2 * ns; ++i) {
    double s = 0.0;
    for (std::size_t c = 0; c < nu_tot; ++c) s += qp.a_in(i, c) * qp.x0[c];
    row_val[i] = s;
  }
  for (std::size_t out = 0; out < ns; ++out) {
    const double need = std::max({0.0, row_val[2 * out] - qp.b_in[2 * out],
                                  row_val[2 * out + 1] - qp.b_in[2 * out + 1]});
    qp.x0[nu_tot + out] = need;
  }
  return qp;
}

namespace {

struct ConstraintRow {
  Vector a;
  double b;
};

double row_dot(const Vector& a, const Vector& x) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * x[i];
  return s;
}

}  // namespace

double qp_objective(const QpProblem& p, const Vector& x) {
  const Vector hx = matvec(p.hessian, x);
  return 0.5 * dot(x, hx) + dot(p.gradient, x);
}

QpSolution solve_qp(const QpProblem& p) {
  const std::size_t n = p.gradient.size();
  if (p.hessian.rows() != n || p.hessian.cols() != n) {
    throw DimensionMismatch("qp hessian/gradient size mismatch");
  }

  // Constraint rows: box bounds first, general rows after.
  std::vector<ConstraintRow> rows;
  for (std::size_t i = 0; i < n; ++i) {
    if (p.ub[i] < QpProblem::kUnbounded) {
      Vector a(n, 0.0);
      a[i] = 1.0;
      rows.push_back({a, p.ub[i]});
    }
    if (p.lb[i] > -QpProblem::kUnbounded) {
      Vector a(n, 0.0);
      a[i] = -1.0;
      rows.push_back({a, -p.lb[i]});
    }
  }
  for (std::size_t i = 0; i < p.a_in.rows(); ++i) {
    Vector a(n, 0.0);
    for (std::size_t j = 0; j < n; ++j) a[j] = p.a_in(i, j);
    rows.push_back({a, p.b_in[i]});
  }
  const std::size_t m_rows = rows.size();

  const CholeskyFactor hf = cholesky_jittered(p.hessian);

  // Unconstrained minimizer short-circuit.
  Vector x = cholesky_solve(hf, vec_scale(-1.0, p.gradient));
  bool feasible = true;
  for (const auto& row : rows) {
    if (row_dot(row.a, x) > row.b + 1e-10) {
      feasible = false;
      break;
    }
  }
  if (feasible) return {x, QpStatus::kOptimal, 0};

  // Feasible start.
  if (!p.x0.empty()) {
    x = p.x0;
  } else {
    x.assign(n, 0.0);
  }
  for (std::size_t i = 0; i < n; ++i) x[i] = std::clamp(x[i], p.lb[i], p.ub[i]);
  for (const auto& row : rows) {
    if (row_dot(row.a, x) > row.b + 1e-7) {
      throw MaxIterations("qp start point infeasible");
    }
  }

  // Cached H^{-1} a_i per constraint.
  std::vector<Vector> hinv_a(m_rows);
  std::vector<bool> have_hinv(m_rows, false);
  auto hinv_of = [&](std::size_t i) -> const Vector& {
    if (!have_hinv[i]) {
      hinv_a[i] = cholesky_solve(hf, rows[i].a);
      have_hinv[i] = true;
    }
    return hinv_a[i];
  };
  const Vector hinv_g = cholesky_solve(hf, p.gradient);

  std::vector<std::size_t> working;
  std::vector<bool> in_working(m_rows, false);
  const int max_iter = static_cast<int>(4 * (n + m_rows)) + 20;

  for (int iter = 1; iter <= max_iter; ++iter) {
    // Equality-constrained subproblem on the working set:
    //   x* = -H^{-1}(g + A_W^T lambda),  S lambda = -(b_W + A_W H^{-1} g)
    const std::size_t w = working.size();
    Vector lambda(w, 0.0);
    Vector x_eq(n);
    if (w == 0) {
      x_eq = vec_scale(-1.0, hinv_g);
    } else {
      Matrix s(w, w);
      Vector rhs(w);
      for (std::size_t i = 0; i < w; ++i) {
        const Vector& vi = hinv_of(working[i]);
        for (std::size_t j = 0; j <= i; ++j) {
          const double sij = row_dot(rows[working[j]].a, vi);
          s(i, j) = sij;
          s(j, i) = sij;
        }
        rhs[i] = -(rows[working[i]].b + row_dot(rows[working[i]].a, hinv_g));
      }
      lambda = cholesky_solve(cholesky_jittered(s), rhs);
      Vector acc = p.gradient;
      for (std::size_t i = 0; i < w; ++i)
        for (std::size_t j = 0; j < n; ++j) acc[j] += lambda[i] * rows[working[i]].a[j];
      x_eq = cholesky_solve(hf, vec_scale(-1.0, acc));
    }

    Vector step = vec_sub(x_eq, x);
    double step_norm = 0.0;
    for (double v : step) step_norm = std::max(step_norm, std::abs(v));

    if (step_norm <= 1e-11 * (1.0 + norm2(x))) {
      // KKT: multipliers of inequality rows must be nonnegative.
      double min_lambda = 0.0;
      std::size_t drop = w;
      for (std::size_t i = 0; i < w; ++i) {
        if (lambda[i] < min_lambda) {
          min_lambda = lambda[i];
          drop = i;
        }
      }
      if (drop == w || min_lambda >= -1e-9) {
        return {x, QpStatus::kOptimal, iter};
      }
      in_working[working[drop]] = false;
      working.erase(working.begin() + static_cast<std::ptrdiff_t>(drop));
      continue;
    }

    // Ratio test against the inactive rows.
    double alpha = 1.0;
    std::size_t blocking = m_rows;
    for (std::size_t i = 0; i < m_rows; ++i) {
      if (in_working[i]) continue;
      const double denom = row_dot(rows[i].a, step);
      if (denom <= 1e-12) continue;
      const double slackness = rows[i].b - row_dot(rows[i].a, x);
      const double t = std::max(0.0, slackness) / denom;
      if (t < alpha) {
        alpha = t;
        blocking = i;
      }
    }
    for (std::size_t i = 0; i < n; ++i) x[i] += alpha * step[i];
    if (blocking < m_rows) {
      working.push_back(blocking);
      in_working[blocking] = true;
    }
  }
  throw MaxIterations("active-set iteration limit reached");
}

MpcStepResult mpc_step(PredictionModel& m, const MpcConfig& cfg,
                       const std::vector<Vector>& ref_window, const Vector& y_meas,
                       const Vector& u_prev) {
  observer_update(m, u_prev, y_meas);
  MpcStepResult result;
  const std::size_t n_u = m.b.cols();
  result.u.assign(n_u, 0.0);
  try {
    QpProblem qp = build_qp(m, cfg, ref_window);
    QpSolution sol;
    try {
      sol = solve_qp(qp);
    } catch (const MaxIterations&) {
      for (std::size_t i = 0; i < qp.gradient.size(); ++i) qp.hessian(i, i) += 1e-8;
      sol = solve_qp(qp);
    }
    for (std::size_t i = 0; i < n_u; ++i) {
      result.u[i] = std::clamp(sol.x[i], cfg.u_min[i], cfg.u_max[i]);
    }
    for (std::size_t i = 0; i < qp.n_slack; ++i) {
      result.max_slack = std::max(result.max_slack, sol.x[qp.n_inputs + i]);
    }
  } catch (const std::exception&) {
    result.solver_failed = true;
    result.u.assign(n_u, 0.0);
  }
  return result;
}

}  // namespace mpcbo
