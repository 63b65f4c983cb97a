// SPDX-License-Identifier: Apache-2.0
//
// Matrix Lie-group primitives for SO(3) and SE_K(3): hat/exp/log maps,
// the closed-form strapdown integrals Gamma_0..Gamma_2, and the K-slot
// group element used as the filter state (K = 4: velocity, position,
// left and right foot contact).

#pragma once

#include <Eigen/Dense>

#include <array>
#include <cmath>

namespace ikf {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

/// Hat operator: skew(w) * u == w.cross(u).
Mat3 skew(const Vec3& w);

/// Inverse of skew() on antisymmetric matrices.
Vec3 unskew(const Mat3& m);

// Closed-form integrals of the rotation exponential used by the discrete
// strapdown model. Gamma_0 is the exponential itself; Gamma_1 is the left
// Jacobian of SO(3); Gamma_2 the second integral. All switch to a 4th-order
// Taylor series below kSmallAngle to avoid cancellation.
inline constexpr double kSmallAngle = 1e-4;

Mat3 gamma0(const Vec3& phi);
Mat3 gamma1(const Vec3& phi);
Mat3 gamma2(const Vec3& phi);

class Rotation;

Rotation so3_exp(const Vec3& phi);

/// Principal log of a rotation, ||result|| <= pi.
///
/// Axis-sign convention at theta == pi (where both signs are valid): the
/// axis component with the largest magnitude is taken non-negative, ties
/// broken toward the lower index. Slightly below pi the sign is recovered
/// from the antisymmetric part instead.
Vec3 so3_log(const Rotation& r);

/// 3x3 rotation with value semantics. Composition counts generations and
/// re-orthonormalizes (Gram-Schmidt) every kRenormInterval products so that
/// long filter runs stay on the manifold.
class Rotation {
 public:
  static constexpr int kRenormInterval = 1000;

  Rotation() : m_(Mat3::Identity()), generation_(0) {}

  /// Wraps a matrix assumed orthonormal (no check). Use is_valid() to test.
  static Rotation from_matrix(const Mat3& m) { return Rotation(m, 0); }

  const Mat3& matrix() const { return m_; }

  Rotation operator*(const Rotation& rhs) const {
    int gen = std::max(generation_, rhs.generation_) + 1;
    Rotation out(m_ * rhs.m_, gen);
    if (gen >= kRenormInterval) out.orthonormalize();
    return out;
  }

  Vec3 operator*(const Vec3& v) const { return m_ * v; }

  Rotation inverse() const { return Rotation(m_.transpose(), generation_); }

  /// mᵀm == I and det == +1 within tol.
  bool is_valid(double tol = 1e-9) const;

  /// Gram-Schmidt on the columns; third column from the cross product so
  /// the result is proper (det +1).
  void orthonormalize();

 private:
  Rotation(const Mat3& m, int gen) : m_(m), generation_(gen) {}

  Mat3 m_;
  int generation_;
};

/// Element of SE_K(3): a rotation bundled with K translation-like columns.
/// The equivalent dense (3+K)x(3+K) matrix has the constant block
/// [0_{Kx3} | I_K] as its bottom rows, which is never stored.
template <int K>
struct GroupElement {
  static constexpr int kDim = 3 + K;
  static constexpr int kTwistDim = 3 + 3 * K;
  using Columns = Eigen::Matrix<double, 3, K>;
  using Twist = Eigen::Matrix<double, kTwistDim, 1>;
  using Dense = Eigen::Matrix<double, kDim, kDim>;

  Rotation rot;
  Columns cols = Columns::Zero();

  static GroupElement identity() { return GroupElement{}; }

  Vec3 col(int i) const { return cols.col(i); }

  Dense dense() const {
    Dense m = Dense::Identity();
    m.template topLeftCorner<3, 3>() = rot.matrix();
    m.template topRightCorner<3, K>() = cols;
    return m;
  }

  GroupElement compose(const GroupElement& rhs) const {
    GroupElement out;
    out.rot = rot * rhs.rot;
    out.cols = rot.matrix() * rhs.cols + cols;
    return out;
  }

  GroupElement inverse() const {
    GroupElement out;
    out.rot = rot.inverse();
    out.cols = -(rot.matrix().transpose() * cols);
    return out;
  }

  /// Lie exponential. Twist layout: [phi, slot_0, ..., slot_{K-1}].
  /// Columns come out as J_l(phi) * slot_k with J_l the SO(3) left Jacobian.
  static GroupElement exp(const Twist& xi) {
    const Vec3 phi = xi.template head<3>();
    GroupElement out;
    out.rot = so3_exp(phi);
    const Mat3 jl = gamma1(phi);
    for (int k = 0; k < K; ++k)
      out.cols.col(k) = jl * xi.template segment<3>(3 + 3 * k);
    return out;
  }

  /// Adjoint little-ad matrix of a twist, for the exponential differential.
  static Eigen::Matrix<double, kTwistDim, kTwistDim> ad(const Twist& xi) {
    Eigen::Matrix<double, kTwistDim, kTwistDim> a =
        Eigen::Matrix<double, kTwistDim, kTwistDim>::Zero();
    const Mat3 phix = skew(xi.template head<3>());
    a.template block<3, 3>(0, 0) = phix;
    for (int k = 0; k < K; ++k) {
      a.template block<3, 3>(3 + 3 * k, 3 + 3 * k) = phix;
      a.template block<3, 3>(3 + 3 * k, 0) =
          skew(xi.template segment<3>(3 + 3 * k));
    }
    return a;
  }
};

/// Left Jacobian of SE_K(3) via the convergent series sum ad^n / (n+1)!.
/// Satisfies d/dt exp(xi(t)) = hat(J_l(xi) xi_dot) * exp(xi).
template <int K>
Eigen::Matrix<double, 3 + 3 * K, 3 + 3 * K> sek3_left_jacobian(
    const typename GroupElement<K>::Twist& xi) {
  constexpr int N = 3 + 3 * K;
  using Mat = Eigen::Matrix<double, N, N>;
  const Mat a = GroupElement<K>::ad(xi);
  Mat term = Mat::Identity();
  Mat sum = term;  // n = 0 term: I / 1!
  for (int n = 1; n <= 40; ++n) {
    term = (term * a) / static_cast<double>(n + 1);
    sum += term;
    if (term.template lpNorm<Eigen::Infinity>() < 1e-18) break;
  }
  return sum;
}

}  // namespace ikf
