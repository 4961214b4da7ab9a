#include "mpcbo/plant.hpp"

#include <cmath>

namespace mpcbo {

Matrix SoftRodPlant::cable_matrix() const {
  // Directions written out exactly so equal tensions cancel bit-exactly.
  const double s3h = 0.5 * std::sqrt(3.0);
  Matrix m(2, 3);
  m(0, 0) = lever;
  m(1, 0) = 0.0;
  m(0, 1) = -0.5 * lever;
  m(1, 1) = s3h * lever;
  m(0, 2) = -0.5 * lever;
  m(1, 2) = -s3h * lever;
  return m;
}

namespace {

struct Deriv {
  std::array<double, 2> dq;
  std::array<double, 2> dqdot;
};

Deriv dynamics(const SoftRodPlant& p, const PlantState& s,
               const std::array<double, 2>& force) {
  Deriv d;
  for (int i = 0; i < 2; ++i) {
    d.dq[i] = s.qdot[i];
    const double spring = p.stiffness * s.q[i] +
                          p.cubic_stiffness * s.q[i] * s.q[i] * s.q[i];
    d.dqdot[i] = (-spring - p.damping * s.qdot[i] + force[i]) / p.mass;
  }
  return d;
}

PlantState advance(const PlantState& s, const Deriv& d, double h) {
  PlantState n;
  for (int i = 0; i < 2; ++i) {
    n.q[i] = s.q[i] + h * d.dq[i];
    n.qdot[i] = s.qdot[i] + h * d.dqdot[i];
  }
  return n;
}

}  // namespace

PlantState plant_step(const SoftRodPlant& p, const PlantState& s, const Vector& u,
                      double dt) {
  if (u.size() != 3) throw DimensionMismatch("plant input must have 3 cables");
  if (!all_finite(u)) throw NonFiniteState("non-finite plant input");
  const Matrix cables = p.cable_matrix();
  std::array<double, 2> force{0.0, 0.0};
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 3; ++j) force[i] += cables(i, j) * u[j];

  const double h = dt / static_cast<double>(p.substeps);
  PlantState x = s;
  for (std::size_t step = 0; step < p.substeps; ++step) {
    const Deriv k1 = dynamics(p, x, force);
    const Deriv k2 = dynamics(p, advance(x, k1, 0.5 * h), force);
    const Deriv k3 = dynamics(p, advance(x, k2, 0.5 * h), force);
    const Deriv k4 = dynamics(p, advance(x, k3, h), force);
    for (int i = 0; i < 2; ++i) {
      x.q[i] += h / 6.0 * (k1.dq[i] + 2.0 * k2.dq[i] + 2.0 * k3.dq[i] + k4.dq[i]);
      x.qdot[i] +=
          h / 6.0 * (k1.dqdot[i] + 2.0 * k2.dqdot[i] + 2.0 * k3.dqdot[i] + k4.dqdot[i]);
    }
  }
  for (int i = 0; i < 2; ++i) {
    if (!std::isfinite(x.q[i]) || !std::isfinite(x.qdot[i])) {
      throw NonFiniteState("plant state blew up");
    }
  }
  return x;
}

Vector plant_output(const SoftRodPlant& p, const PlantState& s, Rng& rng) {
  Vector y(2);
  for (int i = 0; i < 2; ++i) {
    y[i] = s.q[i];
    if (p.noise_std > 0.0) y[i] += p.noise_std * rng.gaussian();
  }
  return y;
}

double plant_energy(const SoftRodPlant& p, const PlantState& s) {
  double e = 0.0;
  for (int i = 0; i < 2; ++i) {
    e += 0.5 * p.mass * s.qdot[i] * s.qdot[i];
    e += 0.5 * p.stiffness * s.q[i] * s.q[i];
    e += 0.25 * p.cubic_stiffness * s.q[i] * s.q[i] * s.q[i] * s.q[i];
  }
  return e;
}

}  // namespace mpcbo
