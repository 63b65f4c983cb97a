// SPDX-License-Identifier: Apache-2.0

#include "inekformer/lie.hpp"

namespace ikf {

Mat3 skew(const Vec3& w) {
  Mat3 m;
  // clang-format off
  m <<     0, -w.z(),  w.y(),
       w.z(),      0, -w.x(),
      -w.y(),  w.x(),      0;
  // clang-format on
  return m;
}

Vec3 unskew(const Mat3& m) {
  return Vec3(m(2, 1), m(0, 2), m(1, 0));
}

namespace {

// Coefficients c1, c2 of I + c1*A + c2*A^2 for each Gamma, with 4th-order
// Taylor fallback below kSmallAngle.
struct SeriesCoeffs {
  double c1;
  double c2;
};

SeriesCoeffs gamma0_coeffs(double theta) {
  if (theta < kSmallAngle) {
    const double t2 = theta * theta;
    return {1.0 - t2 / 6.0 + t2 * t2 / 120.0,
            0.5 - t2 / 24.0 + t2 * t2 / 720.0};
  }
  const double t2 = theta * theta;
  return {std::sin(theta) / theta, (1.0 - std::cos(theta)) / t2};
}

SeriesCoeffs gamma1_coeffs(double theta) {
  if (theta < kSmallAngle) {
    const double t2 = theta * theta;
    return {0.5 - t2 / 24.0 + t2 * t2 / 720.0,
            1.0 / 6.0 - t2 / 120.0 + t2 * t2 / 5040.0};
  }
  const double t2 = theta * theta;
  return {(1.0 - std::cos(theta)) / t2,
          (theta - std::sin(theta)) / (t2 * theta)};
}

SeriesCoeffs gamma2_coeffs(double theta) {
  if (theta < kSmallAngle) {
    const double t2 = theta * theta;
    return {1.0 / 6.0 - t2 / 120.0 + t2 * t2 / 5040.0,
            1.0 / 24.0 - t2 / 720.0 + t2 * t2 / 40320.0};
  }
  const double t2 = theta * theta;
  return {(theta - std::sin(theta)) / (t2 * theta),
          (t2 / 2.0 + std::cos(theta) - 1.0) / (t2 * t2)};
}

Mat3 series(const Vec3& phi, const SeriesCoeffs& c, double diag) {
  const Mat3 a = skew(phi);
  return diag * Mat3::Identity() + c.c1 * a + c.c2 * (a * a);
}

}  // namespace

Mat3 gamma0(const Vec3& phi) { return series(phi, gamma0_coeffs(phi.norm()), 1.0); }
Mat3 gamma1(const Vec3& phi) { return series(phi, gamma1_coeffs(phi.norm()), 1.0); }
Mat3 gamma2(const Vec3& phi) { return series(phi, gamma2_coeffs(phi.norm()), 0.5); }

Rotation so3_exp(const Vec3& phi) {
  return Rotation::from_matrix(gamma0(phi));
}

Vec3 so3_log(const Rotation& r) {
  const Mat3& m = r.matrix();
  const double cos_theta =
      std::clamp((m.trace() - 1.0) / 2.0, -1.0, 1.0);
  const double theta = std::acos(cos_theta);

  if (theta < kSmallAngle) {
    const double t2 = theta * theta;
    const double scale = 1.0 + t2 / 6.0 + 7.0 * t2 * t2 / 360.0;
    return scale * unskew((m - m.transpose()) / 2.0);
  }

  if (theta > M_PI - kSmallAngle) {
    // Axis from the diagonal of R ~ I + (1-cos)*n*n^T - ...; the largest
    // diagonal entry gives the best-conditioned component.
    const double one_minus_cos = 1.0 - cos_theta;
    Vec3 n;
    int i = 0;
    m.diagonal().maxCoeff(&i);
    n[i] = std::sqrt(std::max((m(i, i) - cos_theta) / one_minus_cos, 0.0));
    for (int j = 0; j < 3; ++j) {
      if (j == i) continue;
      n[j] = (m(i, j) + m(j, i)) / (2.0 * one_minus_cos * n[i]);
    }
    // Recover the sign from the antisymmetric part when it is resolvable;
    // otherwise apply the largest-component-non-negative convention.
    const Vec3 w = unskew(m - m.transpose());
    if (w.norm() > 1e-10) {
      if (n.dot(w) < 0) n = -n;
    } else {
      int k = 0;
      n.cwiseAbs().maxCoeff(&k);
      if (n[k] < 0) n = -n;
    }
    return theta * n.normalized();
  }

  return theta / (2.0 * std::sin(theta)) * unskew(m - m.transpose());
}

bool Rotation::is_valid(double tol) const {
  const Mat3 gram = m_.transpose() * m_;
  return (gram - Mat3::Identity()).cwiseAbs().maxCoeff() < tol &&
         std::abs(m_.determinant() - 1.0) < tol;
}

void Rotation::orthonormalize() {
  Vec3 c0 = m_.col(0).normalized();
  Vec3 c1 = (m_.col(1) - c0.dot(m_.col(1)) * c0).normalized();
  m_.col(0) = c0;
  m_.col(1) = c1;
  m_.col(2) = c0.cross(c1);
  generation_ = 0;
}

}  // namespace ikf
