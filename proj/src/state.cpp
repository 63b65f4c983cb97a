// SPDX-License-Identifier: Apache-2.0

#include "inekformer/state.hpp"

namespace ikf {

Vec7 observation_vector(const Vec3& h, Foot side) {
  Vec7 y = Vec7::Zero();
  y.head<3>() = h;
  y[3 + kColPos] = 1.0;
  y[3 + (side == Foot::kLeft ? kColContactLeft : kColContactRight)] = -1.0;
  return y;
}

Vec3 innovation(const FilterState& x, const Vec7& y) {
  return x.x.rot.matrix() * y.head<3>() +
         x.x.cols * y.tail<kNumStateColumns>();
}

double contact_probability(double fz) {
  // mu = 1 - 1/(1 + e^{-(F_T + fz)}) evaluated in the branch that keeps the
  // small tail representable (the naive form underflows to exactly 0 for a
  // swing foot).
  const double x = std::clamp(kContactForceThreshold + fz, -500.0, 500.0);
  if (x >= 0.0) {
    const double e = std::exp(-x);
    return e / (1.0 + e);
  }
  return 1.0 / (1.0 + std::exp(x));
}

}  // namespace ikf
