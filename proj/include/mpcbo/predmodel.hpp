#ifndef MPCBO_PREDMODEL_HPP
#define MPCBO_PREDMODEL_HPP

#include <cstddef>
#include <vector>

#include "mpcbo/matrix.hpp"

namespace mpcbo {

struct ModelDims {
  std::size_t n_z = 2;
  std::size_t n_u = 3;
  std::size_t n_y = 2;

  std::size_t theta_len() const { return n_z * n_z + n_z * n_u; }
};

/// Search box for one theta vector: per-element lower/upper bounds.
struct ThetaBounds {
  Vector lower;
  Vector upper;

  static ThetaBounds for_dims(const ModelDims& dims, double a_bound = 1.2,
                              double b_bound = 0.5);
  std::size_t size() const { return lower.size(); }
};

struct ThetaVector {
  Vector values;
  ThetaBounds bounds;
};

/// Linear prediction model with an embedded observer state. C is fixed to
/// [I 0] and D to 0 under the default parameterization, so theta only covers
/// the A and B entries.
struct PredictionModel {
  Matrix a;              // n_z x n_z
  Matrix b;              // n_z x n_u
  Matrix c;              // n_y x n_z
  Matrix d;              // n_y x n_u
  Matrix observer_gain;  // n_z x n_y
  Vector z;              // observer state, n_z

  void reset_state() { z.assign(z.size(), 0.0); }
};

/// Unpacks theta (A row-major, then B row-major) and attaches a steady-state
/// Kalman observer gain with unit covariances; falls back to zero gain when
/// the Riccati iteration does not converge.
PredictionModel decode_theta(const ThetaVector& theta, const ModelDims& dims);

/// Builds a model directly from (a, b) with the same observer policy as
/// decode_theta.
PredictionModel make_model(const Matrix& a, const Matrix& b, std::size_t n_y);

/// Largest |eigenvalue|, estimated by normalized repeated squaring of the
/// iterate (power iteration on successive squares); robust to complex
/// dominant pairs.
double spectral_radius(const Matrix& m);

/// z <- a z + b u + L (y_meas - c z - d u)
void observer_update(PredictionModel& m, const Vector& u, const Vector& y_meas);

/// Open-loop model response from the current observer state; the stored
/// state is not mutated.
std::vector<Vector> rollout(const PredictionModel& m,
                            const std::vector<Vector>& u_seq);

}  // namespace mpcbo

#endif
