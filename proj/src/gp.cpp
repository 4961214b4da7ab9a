#include "mpcbo/gp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "mpcbo/rng.hpp"

namespace mpcbo {

namespace {
constexpr double kLog2Pi = 1.8378770664093454836;
constexpr double kNoiseFloor = 1e-10;
}  // namespace

double kernel(const Vector& x1, const Vector& x2, const GpHyperparams& h) {
  if (x1.size() != x2.size() || x1.size() != h.lengthscales.size()) {
    throw DimensionMismatch("kernel dimension mismatch");
  }
  double s = 0.0;
  for (std::size_t d = 0; d < x1.size(); ++d) {
    const double r = (x1[d] - x2[d]) / h.lengthscales[d];
    s += r * r;
  }
  return h.signal_variance * std::exp(-0.5 * s);
}

namespace serial {
Matrix kernel_matrix(const std::vector<Vector>& xs, const GpHyperparams& h) {
  const std::size_t n = xs.size();
  Matrix k(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j <= i; ++j) {
      const double v = kernel(xs[i], xs[j], h);
      k(i, j) = v;
      k(j, i) = v;
    }
  }
  return k;
}
}  // namespace serial

Matrix kernel_matrix(const std::vector<Vector>& xs, const GpHyperparams& h) {
  const std::size_t n = xs.size();
  Matrix k(n, n);
  const long long nn = static_cast<long long>(n);
#pragma omp parallel for schedule(dynamic, 8) if (nn > 31)
  for (long long i = 0; i < nn; ++i) {
    for (long long j = 0; j <= i; ++j) {
      const double v = kernel(xs[i], xs[j], h);
      k(i, j) = v;
      k(j, i) = v;
    }
  }
  return k;
}

namespace {

struct LmlResult {
  double value = -std::numeric_limits<double>::infinity();
  CholeskyFactor chol;
  Vector alpha;
  bool ok = false;
};

LmlResult lml_with_cache(const std::vector<Vector>& inputs, const Vector& targets,
                         const GpHyperparams& h) {
  LmlResult r;
  const std::size_t n = inputs.size();
  Matrix k = kernel_matrix(inputs, h);
  for (std::size_t i = 0; i < n; ++i) k(i, i) += std::max(h.noise_variance, kNoiseFloor);
  try {
    r.chol = cholesky_jittered(k);
  } catch (const NotPositiveDefinite&) {
    return r;
  }
  r.alpha = cholesky_solve(r.chol, targets);
  double log_det_half = 0.0;
  for (std::size_t i = 0; i < n; ++i) log_det_half += std::log(r.chol.lower(i, i));
  r.value = -0.5 * dot(targets, r.alpha) - log_det_half -
            0.5 * static_cast<double>(n) * kLog2Pi;
  r.ok = std::isfinite(r.value);
  return r;
}

GpHyperparams unpack_log(const Vector& log_params, std::size_t dim) {
  GpHyperparams h;
  h.signal_variance = std::exp(log_params[0]);
  h.lengthscales.resize(dim);
  for (std::size_t d = 0; d < dim; ++d) h.lengthscales[d] = std::exp(log_params[1 + d]);
  h.noise_variance = std::exp(log_params[1 + dim]);
  return h;
}

void clamp_log_params(Vector& lp, std::size_t dim) {
  lp[0] = std::clamp(lp[0], std::log(1e-6), std::log(1e6));
  for (std::size_t d = 0; d < dim; ++d)
    lp[1 + d] = std::clamp(lp[1 + d], std::log(1e-3), std::log(1e3));
  lp[1 + dim] = std::clamp(lp[1 + dim], std::log(kNoiseFloor), std::log(1e2));
}

}  // namespace

double log_marginal_likelihood(const std::vector<Vector>& inputs,
                               const Vector& targets, const GpHyperparams& h) {
  if (inputs.size() != targets.size()) {
    throw DimensionMismatch("lml inputs/targets length mismatch");
  }
  const std::size_t n = inputs.size();
  Matrix k = kernel_matrix(inputs, h);
  for (std::size_t i = 0; i < n; ++i) k(i, i) += std::max(h.noise_variance, kNoiseFloor);
  const CholeskyFactor f = cholesky_jittered(k);
  const Vector alpha = cholesky_solve(f, targets);
  double log_det_half = 0.0;
  for (std::size_t i = 0; i < n; ++i) log_det_half += std::log(f.lower(i, i));
  return -0.5 * dot(targets, alpha) - log_det_half -
         0.5 * static_cast<double>(n) * kLog2Pi;
}

void GpModel::refresh_cache() {
  Matrix k = kernel_matrix(inputs_, hyper_);
  for (std::size_t i = 0; i < inputs_.size(); ++i)
    k(i, i) += std::max(hyper_.noise_variance, kNoiseFloor);
  chol_ = cholesky_jittered(k);
  alpha_ = cholesky_solve(chol_, targets_std_);
}

GpModel::Prediction GpModel::predict(const Vector& x) const {
  const std::size_t n = inputs_.size();
  Vector kx(n);
  for (std::size_t i = 0; i < n; ++i) kx[i] = kernel(x, inputs_[i], hyper_);
  const double mean_std = dot(kx, alpha_);
  const Vector v = forward_substitute(chol_.lower, kx);
  double var_std = kernel(x, x, hyper_) - dot(v, v);
  var_std = std::max(0.0, var_std);
  Prediction p;
  p.mean = target_mean_ + target_std_ * mean_std;
  p.variance = target_std_ * target_std_ * var_std;
  return p;
}

GpModel GpModel::with_hyperparams(const std::vector<Vector>& inputs,
                                  const Vector& targets, const GpHyperparams& h,
                                  bool standardize) {
  if (inputs.empty() || inputs.size() != targets.size()) {
    throw DimensionMismatch("gp training set empty or mismatched");
  }
  GpModel m;
  m.inputs_ = inputs;
  m.hyper_ = h;
  m.hyper_.noise_variance = std::max(m.hyper_.noise_variance, kNoiseFloor);
  const std::size_t n = targets.size();
  if (standardize) {
    double mu = 0.0;
    for (double t : targets) mu += t;
    mu /= static_cast<double>(n);
    double var = 0.0;
    for (double t : targets) var += (t - mu) * (t - mu);
    var /= static_cast<double>(n);
    m.target_mean_ = mu;
    m.target_std_ = std::max(std::sqrt(var), 1e-12);
  } else {
    m.target_mean_ = 0.0;
    m.target_std_ = 1.0;
  }
  m.targets_std_.resize(n);
  for (std::size_t i = 0; i < n; ++i)
    m.targets_std_[i] = (targets[i] - m.target_mean_) / m.target_std_;
  m.refresh_cache();
  return m;
}

GpModel GpModel::fit(const std::vector<Vector>& inputs, const Vector& targets,
                     const GpFitOptions& options) {
  if (inputs.empty() || inputs.size() != targets.size()) {
    throw DimensionMismatch("gp training set empty or mismatched");
  }
  // Active-set truncation: keep the most recent points only.
  std::vector<Vector> xs = inputs;
  Vector ys = targets;
  if (xs.size() > options.active_set_size) {
    const std::size_t drop = xs.size() - options.active_set_size;
    xs.erase(xs.begin(), xs.begin() + static_cast<std::ptrdiff_t>(drop));
    ys.erase(ys.begin(), ys.begin() + static_cast<std::ptrdiff_t>(drop));
  }
  const std::size_t n = xs.size();
  const std::size_t dim = xs[0].size();

  // Standardize targets before the likelihood search.
  double mu = 0.0;
  for (double t : ys) mu += t;
  mu /= static_cast<double>(n);
  double var = 0.0;
  for (double t : ys) var += (t - mu) * (t - mu);
  var /= static_cast<double>(n);
  const double sd = std::max(std::sqrt(var), 1e-12);
  Vector ys_std(n);
  for (std::size_t i = 0; i < n; ++i) ys_std[i] = (ys[i] - mu) / sd;

  const std::size_t np = dim + 2;
  std::vector<Vector> best_params(options.restarts);
  Vector best_values(options.restarts,
                     -std::numeric_limits<double>::infinity());

  const long long restarts = static_cast<long long>(options.restarts);
#pragma omp parallel for schedule(dynamic) if (restarts > 1)
  for (long long r = 0; r < restarts; ++r) {
    Rng rng(derive_seed(options.seed, 0x67500000ULL + static_cast<std::uint64_t>(r)));
    Vector lp(np);
    lp[0] = rng.uniform(std::log(0.2), std::log(5.0));
    for (std::size_t d = 0; d < dim; ++d)
      lp[1 + d] = rng.uniform(std::log(0.05), std::log(2.0));
    lp[1 + dim] = rng.uniform(std::log(1e-6), std::log(0.5));

    auto objective = [&](const Vector& params) {
      return lml_with_cache(xs, ys_std, unpack_log(params, dim)).value;
    };

    double f0 = objective(lp);
    double step = 0.25;
    const double grad_h = 1e-5;
    for (std::size_t it = 0; it < options.max_iterations; ++it) {
      // Central-difference gradient in log space.
      Vector grad(np, 0.0);
      for (std::size_t i = 0; i < np; ++i) {
        Vector lo = lp, hi = lp;
        lo[i] -= grad_h;
        hi[i] += grad_h;
        grad[i] = (objective(hi) - objective(lo)) / (2.0 * grad_h);
      }
      const double gnorm = norm2(grad);
      if (!(gnorm > 0.0) || !std::isfinite(gnorm)) break;

      // Backtracking ascent step.
      bool improved = false;
      for (int bt = 0; bt < 12; ++bt) {
        Vector trial = lp;
        for (std::size_t i = 0; i < np; ++i) trial[i] += step / gnorm * grad[i];
        clamp_log_params(trial, dim);
        const double ft = objective(trial);
        if (ft > f0) {
          const double gain = ft - f0;
          lp = trial;
          f0 = ft;
          improved = true;
          step = std::min(step * 1.6, 2.0);
          if (gain < options.tolerance) it = options.max_iterations;  // converged
          break;
        }
        step *= 0.5;
      }
      if (!improved) break;
    }
    best_params[r] = lp;
    best_values[r] = f0;
  }

  std::size_t winner = 0;
  for (std::size_t r = 1; r < options.restarts; ++r) {
    if (best_values[r] > best_values[winner]) winner = r;
  }
  if (!std::isfinite(best_values[winner])) {
    throw NotPositiveDefinite("all hyperparameter restarts failed");
  }

  GpModel m;
  m.inputs_ = std::move(xs);
  m.target_mean_ = mu;
  m.target_std_ = sd;
  m.targets_std_ = std::move(ys_std);
  m.hyper_ = unpack_log(best_params[winner], dim);
  m.refresh_cache();
  return m;
}

}  // namespace mpcbo
