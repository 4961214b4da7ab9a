// Compares the OpenMP kernels against their serial reference
// implementations: dense matmul, GP kernel matrix assembly, and batched
// acquisition probing.

#include <chrono>
#include <cstdio>
#include <functional>
#include <vector>

#include "mpcbo/bo.hpp"
#include "mpcbo/gp.hpp"
#include "mpcbo/matrix.hpp"
#include "mpcbo/rng.hpp"

using namespace mpcbo;

namespace {

double seconds_of(const std::function<void()>& fn, int reps) {
  const auto t0 = std::chrono::steady_clock::now();
  for (int i = 0; i < reps; ++i) fn();
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count() /
         reps;
}

void report(const char* name, double serial_s, double parallel_s) {
  std::printf("%-28s serial %9.3f ms   parallel %9.3f ms   speedup %.2fx\n", name,
              serial_s * 1e3, parallel_s * 1e3, serial_s / parallel_s);
}

}  // namespace

int main() {
  Rng rng(7);

  {
    const std::size_t n = 384;
    Matrix a(n, n), b(n, n);
    for (double& v : a.data()) v = rng.uniform(-1.0, 1.0);
    for (double& v : b.data()) v = rng.uniform(-1.0, 1.0);
    const double ts = seconds_of([&] { (void)serial::matmul(a, b); }, 3);
    const double tp = seconds_of([&] { (void)matmul(a, b); }, 3);
    report("matmul 384x384", ts, tp);
  }

  {
    const std::size_t n = 300, dim = 10;
    std::vector<Vector> xs(n, Vector(dim));
    for (auto& x : xs)
      for (double& v : x) v = rng.uniform();
    GpHyperparams h;
    h.lengthscales.assign(dim, 0.3);
    const double ts = seconds_of([&] { (void)serial::kernel_matrix(xs, h); }, 10);
    const double tp = seconds_of([&] { (void)kernel_matrix(xs, h); }, 10);
    report("kernel matrix 300x300", ts, tp);
  }

  {
    const std::size_t n = 60, dim = 10;
    std::vector<Vector> xs(n, Vector(dim));
    Vector ys(n);
    for (std::size_t i = 0; i < n; ++i) {
      for (double& v : xs[i]) v = rng.uniform();
      ys[i] = rng.gaussian();
    }
    GpHyperparams h;
    h.lengthscales.assign(dim, 0.3);
    h.noise_variance = 1e-3;
    const GpModel model = GpModel::with_hyperparams(xs, ys, h);
    // Serial reference for the probe batch: one EI evaluation at a time
    // through the same code path the optimizer parallelizes.
    const double ts = seconds_of(
        [&] {
          Vector x(dim);
          Rng probe_rng(11);
          double acc = 0.0;
          for (int i = 0; i < 4096; ++i) {
            for (double& v : x) v = probe_rng.uniform();
            acc += expected_improvement(model, x, 0.0);
          }
          (void)acc;
        },
        3);
    const double tp = seconds_of(
        [&] { (void)optimize_acquisition(model, 0.0, dim, 4096, 11); }, 3);
    report("EI probe batch 4096", ts, tp);
  }
  return 0;
}
