#ifndef MPCBO_NUMERICS_HPP
#define MPCBO_NUMERICS_HPP

#include "mpcbo/matrix.hpp"

namespace mpcbo {

/// Lower-triangular Cholesky factor L with L*L^T equal to the factored
/// matrix.
struct CholeskyFactor {
  Matrix lower;
  std::size_t dim = 0;
};

// Throws NotPositiveDefinite on a non-positive pivot; callers that factor
// kernel matrices retry through cholesky_jittered instead.
CholeskyFactor cholesky(const Matrix& m);

// Retries with +1e-10*I, +1e-8*I, +1e-6*I on the diagonal before giving up.
CholeskyFactor cholesky_jittered(const Matrix& m);

Vector cholesky_solve(const CholeskyFactor& f, const Vector& b);

// Forward substitution L y = b only (used where just L^{-1} b is needed).
Vector forward_substitute(const Matrix& lower, const Vector& b);

/// Steady-state Kalman gain L = A P C^T (C P C^T + V)^{-1}, with P the fixed
/// point of the discrete Riccati recursion
///   P <- A P A^T - A P C^T (C P C^T + V)^{-1} C P A^T + W,
/// iterated until ||dP||_F < 1e-10 (at most 10000 steps).
Matrix dare_steady_kalman(const Matrix& a, const Matrix& c, const Matrix& w,
                          const Matrix& v);

double norm_cdf(double x);
double norm_pdf(double x);

}  // namespace mpcbo

#endif
