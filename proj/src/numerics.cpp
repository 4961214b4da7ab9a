#include "mpcbo/numerics.hpp"

#include <cmath>
#include <cstddef>

namespace mpcbo {

CholeskyFactor cholesky(const Matrix& m) {
  if (m.rows() != m.cols()) throw DimensionMismatch("cholesky needs a square matrix");
  const std::size_t n = m.rows();
  Matrix l(n, n);
  for (std::size_t j = 0; j < n; ++j) {
    double diag = m(j, j);
    for (std::size_t k = 0; k < j; ++k) diag -= l(j, k) * l(j, k);
    if (!(diag > 0.0)) {
      throw NotPositiveDefinite("non-positive pivot at row " + std::to_string(j));
    }
    l(j, j) = std::sqrt(diag);
    for (std::size_t i = j + 1; i < n; ++i) {
      double s = m(i, j);
      for (std::size_t k = 0; k < j; ++k) s -= l(i, k) * l(j, k);
      l(i, j) = s / l(j, j);
    }
  }
  return {l, n};
}

CholeskyFactor cholesky_jittered(const Matrix& m) {
  static constexpr double kJitters[] = {0.0, 1e-10, 1e-8, 1e-6};
  for (double jitter : kJitters) {
    Matrix mj = m;
    for (std::size_t i = 0; i < m.rows(); ++i) mj(i, i) += jitter;
    try {
      return cholesky(mj);
    } catch (const NotPositiveDefinite&) {
      // try the next jitter level
    }
  }
  throw NotPositiveDefinite("matrix not positive definite after jitter");
}

Vector forward_substitute(const Matrix& lower, const Vector& b) {
  const std::size_t n = lower.rows();
  if (b.size() != n) throw DimensionMismatch("forward_substitute length mismatch");
  Vector y(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    double s = b[i];
    for (std::size_t k = 0; k < i; ++k) s -= lower(i, k) * y[k];
    y[i] = s / lower(i, i);
  }
  return y;
}

Vector cholesky_solve(const CholeskyFactor& f, const Vector& b) {
  const std::size_t n = f.dim;
  if (b.size() != n) throw DimensionMismatch("cholesky_solve length mismatch");
  Vector y = forward_substitute(f.lower, b);
  Vector x(n, 0.0);
  for (std::size_t ii = n; ii-- > 0;) {
    double s = y[ii];
    for (std::size_t k = ii + 1; k < n; ++k) s -= f.lower(k, ii) * x[k];
    x[ii] = s / f.lower(ii, ii);
  }
  return x;
}

Matrix dare_steady_kalman(const Matrix& a, const Matrix& c, const Matrix& w,
                          const Matrix& v) {
  const std::size_t n = a.rows();
  const std::size_t p = c.rows();
  if (a.cols() != n || c.cols() != n || w.rows() != n || w.cols() != n ||
      v.rows() != p || v.cols() != p) {
    throw DimensionMismatch("dare_steady_kalman dimension mismatch");
  }
  Matrix pk = w;
  const Matrix at = a.transposed();
  const Matrix ct = c.transposed();
  constexpr int kMaxIter = 10000;
  for (int iter = 0; iter < kMaxIter; ++iter) {
    // S = C P C^T + V, solved column-wise against (C P A^T).
    const Matrix pct = matmul(pk, ct);
    const Matrix s = matmul(c, pct) + v;
    CholeskyFactor sf = cholesky_jittered(s);
    const Matrix cpat = matmul(c, matmul(pk, at));  // p x n
    Matrix sinv_cpat(p, cpat.cols());
    for (std::size_t j = 0; j < cpat.cols(); ++j) {
      Vector col(p);
      for (std::size_t i = 0; i < p; ++i) col[i] = cpat(i, j);
      Vector sol = cholesky_solve(sf, col);
      for (std::size_t i = 0; i < p; ++i) sinv_cpat(i, j) = sol[i];
    }
    const Matrix apct = matmul(a, pct);  // n x p
    Matrix next = matmul(a, matmul(pk, at)) - matmul(apct, sinv_cpat) + w;
    // symmetrize against drift
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i + 1; j < n; ++j) {
        const double m = 0.5 * (next(i, j) + next(j, i));
        next(i, j) = m;
        next(j, i) = m;
      }
    const double delta = frobenius_norm(next - pk);
    pk = next;
    if (frobenius_norm(pk) > 1e12) {
      throw NoConvergence("riccati iteration diverged");
    }
    if (delta < 1e-10) {
      // L = A P C^T (C P C^T + V)^{-1}
      const Matrix pct2 = matmul(pk, ct);
      const Matrix s2 = matmul(c, pct2) + v;
      CholeskyFactor s2f = cholesky_jittered(s2);
      const Matrix apc = matmul(a, pct2);  // n x p
      Matrix gain(n, p);
      // gain^T solves S gain^T = (A P C^T)^T
      for (std::size_t i = 0; i < n; ++i) {
        Vector row(p);
        for (std::size_t j = 0; j < p; ++j) row[j] = apc(i, j);
        Vector sol = cholesky_solve(s2f, row);
        for (std::size_t j = 0; j < p; ++j) gain(i, j) = sol[j];
      }
      return gain;
    }
  }
  throw NoConvergence("riccati iteration hit the step limit");
}

double norm_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

double norm_pdf(double x) {
  static const double kInvSqrt2Pi = 0.3989422804014326779;
  return kInvSqrt2Pi * std::exp(-0.5 * x * x);
}

}  // namespace mpcbo
