#ifndef MPCBO_PLANT_HPP
#define MPCBO_PLANT_HPP

#include <array>
#include <cstddef>

#include "mpcbo/matrix.hpp"
#include "mpcbo/rng.hpp"

namespace mpcbo {

struct PlantState {
  std::array<double, 2> q{0.0, 0.0};     // modal displacement [m]
  std::array<double, 2> qdot{0.0, 0.0};  // modal velocity [m/s]
};

/// Planar two-mode Duffing-type oscillator driven by three cables spaced at
/// 120 degrees. Stands in for the unknown soft-robot dynamics: nonlinear,
/// dissipative, three inputs, two measured outputs.
struct SoftRodPlant {
  double mass = 0.17;            // kg
  double stiffness = 1.0;        // N/m
  double cubic_stiffness = 100;  // N/m^3
  double damping = 0.2;          // N*s/m
  double lever = 0.25;           // cable moment coefficient
  double noise_std = 0.005;      // m, measurement noise
  std::size_t substeps = 50;     // RK4 sub-intervals per control period

  /// 2x3 map from cable tensions to planar modal forces: unit directions at
  /// 0, 120, 240 degrees scaled by the lever coefficient.
  Matrix cable_matrix() const;
};

/// One zero-order-hold control period of classical RK4 integration.
/// Throws NonFiniteState when the state blows up.
PlantState plant_step(const SoftRodPlant& p, const PlantState& s, const Vector& u,
                      double dt);

/// Measured tip position q + N(0, noise_std^2 I).
Vector plant_output(const SoftRodPlant& p, const PlantState& s, Rng& rng);

/// Mechanical energy 1/2 m ||qdot||^2 + 1/2 k ||q||^2 + 1/4 k3 sum q^4.
double plant_energy(const SoftRodPlant& p, const PlantState& s);

}  // namespace mpcbo

#endif
