#include "mpcbo/predmodel.hpp"

#include <cmath>

#include "mpcbo/numerics.hpp"

namespace mpcbo {

ThetaBounds ThetaBounds::for_dims(const ModelDims& dims, double a_bound,
                                  double b_bound) {
  ThetaBounds b;
  const std::size_t na = dims.n_z * dims.n_z;
  const std::size_t nb = dims.n_z * dims.n_u;
  b.lower.assign(na + nb, 0.0);
  b.upper.assign(na + nb, 0.0);
  for (std::size_t i = 0; i < na; ++i) {
    b.lower[i] = -a_bound;
    b.upper[i] = a_bound;
  }
  for (std::size_t i = na; i < na + nb; ++i) {
    b.lower[i] = -b_bound;
    b.upper[i] = b_bound;
  }
  return b;
}

PredictionModel make_model(const Matrix& a, const Matrix& b, std::size_t n_y) {
  const std::size_t n_z = a.rows();
  const std::size_t n_u = b.cols();
  if (a.cols() != n_z || b.rows() != n_z || n_y > n_z) {
    throw DimensionMismatch("inconsistent prediction model dimensions");
  }
  PredictionModel m;
  m.a = a;
  m.b = b;
  m.c = Matrix(n_y, n_z);
  for (std::size_t i = 0; i < n_y; ++i) m.c(i, i) = 1.0;
  m.d = Matrix(n_y, n_u);
  try {
    m.observer_gain =
        dare_steady_kalman(a, m.c, Matrix::identity(n_z), Matrix::identity(n_y));
  } catch (const NoConvergence&) {
    m.observer_gain = Matrix(n_z, n_y);
  }
  m.z.assign(n_z, 0.0);
  return m;
}

PredictionModel decode_theta(const ThetaVector& theta, const ModelDims& dims) {
  if (theta.values.size() != dims.theta_len()) {
    throw DimensionMismatch("theta length does not match model dimensions");
  }
  Matrix a(dims.n_z, dims.n_z);
  Matrix b(dims.n_z, dims.n_u);
  std::size_t idx = 0;
  for (std::size_t i = 0; i < dims.n_z; ++i)
    for (std::size_t j = 0; j < dims.n_z; ++j) a(i, j) = theta.values[idx++];
  for (std::size_t i = 0; i < dims.n_z; ++i)
    for (std::size_t j = 0; j < dims.n_u; ++j) b(i, j) = theta.values[idx++];
  return make_model(a, b, dims.n_y);
}

double spectral_radius(const Matrix& m) {
  if (m.rows() != m.cols()) throw DimensionMismatch("spectral_radius needs square");
  const std::size_t n = m.rows();
  if (n == 0) return 0.0;
  double norm0 = frobenius_norm(m);
  if (norm0 == 0.0) return 0.0;
  // rho = lim ||M^(2^k)||^(1/2^k); track log-norm to dodge overflow.
  Matrix b = (1.0 / norm0) * m;
  double log_norm = std::log(norm0);  // log ||M^(2^k)|| with b normalized
  double scale = 1.0;                 // 1 / 2^k
  double prev = std::exp(log_norm);
  for (int k = 0; k < 64; ++k) {
    b = matmul(b, b);
    const double nb = frobenius_norm(b);
    if (nb == 0.0) return 0.0;
    log_norm = 2.0 * log_norm + std::log(nb);
    b = (1.0 / nb) * b;
    scale *= 0.5;
    const double est = std::exp(log_norm * scale);
    if (k > 4 && std::abs(est - prev) <= 1e-9 * (1.0 + est)) return est;
    prev = est;
  }
  return prev;
}

void observer_update(PredictionModel& m, const Vector& u, const Vector& y_meas) {
  if (u.size() != m.b.cols() || y_meas.size() != m.c.rows()) {
    throw DimensionMismatch("observer_update dimension mismatch");
  }
  const Vector pred_y = vec_add(matvec(m.c, m.z), matvec(m.d, u));
  const Vector innovation = vec_sub(y_meas, pred_y);
  Vector next = vec_add(matvec(m.a, m.z), matvec(m.b, u));
  next = vec_add(next, matvec(m.observer_gain, innovation));
  m.z = next;
}

std::vector<Vector> rollout(const PredictionModel& m,
                            const std::vector<Vector>& u_seq) {
  std::vector<Vector> outputs;
  outputs.reserve(u_seq.size());
  Vector z = m.z;
  for (const Vector& u : u_seq) {
    z = vec_add(matvec(m.a, z), matvec(m.b, u));
    outputs.push_back(vec_add(matvec(m.c, z), matvec(m.d, u)));
  }
  return outputs;
}

}  // namespace mpcbo
