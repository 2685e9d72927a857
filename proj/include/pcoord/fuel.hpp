#pragma once

// Polynomial fuel-rate surrogate (mL/s): a speed-dependent running term plus
// an acceleration power term that only charges positive traction.

#include <algorithm>
#include <span>

#include "pcoord/platoon.hpp"

namespace pcoord {

struct FuelModel {
  double c0 = 0.375;    // idle rate
  double c1 = 0.03;
  double c2 = 0.0;
  double c3 = 9.72e-5;
  double d0 = 0.126;
  double d1 = 0.0;

  double rate(double v, double u) const {
    return c0 + v * (c1 + v * (c2 + v * c3)) + std::max(0.0, u) * v * (d0 + d1 * v);
  }

  friend bool operator==(const FuelModel&, const FuelModel&) = default;
};

/// Trapezoidal integral of the rate over equally spaced samples.
inline double fuel_consumed(std::span<const VehicleState> samples, double dt, const FuelModel& model = {}) {
  if (samples.size() < 2) return 0.0;
  double total = 0.0;
  double prev = model.rate(samples[0].v, samples[0].u);
  for (std::size_t i = 1; i < samples.size(); ++i) {
    const double r = model.rate(samples[i].v, samples[i].u);
    total += 0.5 * (prev + r) * dt;
    prev = r;
  }
  return total;
}

}  // namespace pcoord
