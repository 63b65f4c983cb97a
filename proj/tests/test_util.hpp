// SPDX-License-Identifier: Apache-2.0
//
// Shared test helpers: dense matrix-series exponential oracles and seeded
// random generators.

#pragma once

#include "inekformer/lie.hpp"
#include "inekformer/state.hpp"

#include <random>

namespace ikf::test {

/// Truncated matrix-series exponential, independent of the closed forms.
template <typename Mat>
Mat series_exp(const Mat& a, int terms = 30) {
  Mat term = Mat::Identity(a.rows(), a.cols());
  Mat sum = term;
  for (int n = 1; n <= terms; ++n) {
    term = (term * a) / static_cast<double>(n);
    sum += term;
  }
  return sum;
}

/// Dense 7x7 Lie-algebra matrix of a 15-dim twist.
inline Mat7 twist_hat(const Twist15& xi) {
  Mat7 m = Mat7::Zero();
  m.topLeftCorner<3, 3>() = skew(xi.head<3>());
  for (int k = 0; k < 4; ++k)
    m.block<3, 1>(0, 3 + k) = xi.segment<3>(3 + 3 * k);
  return m;
}

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}

  double uniform(double lo, double hi) {
    return std::uniform_real_distribution<double>(lo, hi)(gen_);
  }

  Vec3 vec3(double scale = 1.0) {
    Vec3 v;
    for (int i = 0; i < 3; ++i) v[i] = uniform(-scale, scale);
    return v;
  }

  Twist15 twist(double rot_scale = 1.0, double trans_scale = 1.0) {
    Twist15 xi;
    xi.head<3>() = vec3(rot_scale);
    for (int k = 0; k < 4; ++k) xi.segment<3>(3 + 3 * k) = vec3(trans_scale);
    return xi;
  }

  Rotation rotation(double scale = 1.0) { return so3_exp(vec3(scale)); }

  StateElement element(double rot_scale = 1.0, double trans_scale = 1.0) {
    StateElement g;
    g.rot = rotation(rot_scale);
    for (int k = 0; k < 4; ++k) g.cols.col(k) = vec3(trans_scale);
    return g;
  }

  std::mt19937_64& gen() { return gen_; }

 private:
  std::mt19937_64 gen_;
};

}  // namespace ikf::test
