#ifndef MPCBO_GP_HPP
#define MPCBO_GP_HPP

#include <cstddef>
#include <cstdint>
#include <vector>

#include "mpcbo/matrix.hpp"
#include "mpcbo/numerics.hpp"

namespace mpcbo {

/// Squared-exponential (ARD) kernel hyperparameters. Stored linearly;
/// optimization happens in log space so positivity is structural.
struct GpHyperparams {
  double signal_variance = 1.0;
  Vector lengthscales;          // one per input dimension
  double noise_variance = 0.1;  // floored at 1e-10
};

double kernel(const Vector& x1, const Vector& x2, const GpHyperparams& h);

// Gram matrix of the training set. The serial variant is the reference
// implementation used by tests and the kernel benchmark.
Matrix kernel_matrix(const std::vector<Vector>& xs, const GpHyperparams& h);
namespace serial {
Matrix kernel_matrix(const std::vector<Vector>& xs, const GpHyperparams& h);
}

/// log p(y | X, h) for zero-mean targets:
///   -1/2 y^T alpha - sum log diag(L) - N/2 log(2 pi)
double log_marginal_likelihood(const std::vector<Vector>& inputs,
                               const Vector& targets, const GpHyperparams& h);

struct GpFitOptions {
  std::size_t restarts = 8;
  std::size_t max_iterations = 200;
  double tolerance = 1e-6;
  std::size_t active_set_size = 300;
  std::uint64_t seed = 0;
};

class GpModel {
 public:
  struct Prediction {
    double mean = 0.0;
    double variance = 0.0;
  };

  /// Posterior at x, reported in original target units.
  Prediction predict(const Vector& x) const;

  const GpHyperparams& hyper() const { return hyper_; }
  double target_mean() const { return target_mean_; }
  double target_std() const { return target_std_; }
  std::size_t train_size() const { return inputs_.size(); }

  /// Fits hyperparameters by multistart numerical-gradient ascent on the log
  /// marginal likelihood. Inputs are expected normalized to the unit box;
  /// targets are standardized internally.
  static GpModel fit(const std::vector<Vector>& inputs, const Vector& targets,
                     const GpFitOptions& options);

  /// Model with fixed hyperparameters (no search); used by tests and by
  /// predict oracles.
  static GpModel with_hyperparams(const std::vector<Vector>& inputs,
                                  const Vector& targets, const GpHyperparams& h,
                                  bool standardize = true);

 private:
  void refresh_cache();

  std::vector<Vector> inputs_;
  Vector targets_std_;
  double target_mean_ = 0.0;
  double target_std_ = 1.0;
  GpHyperparams hyper_;
  CholeskyFactor chol_;
  Vector alpha_;
};

}  // namespace mpcbo

#endif
