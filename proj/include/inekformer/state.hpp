// SPDX-License-Identifier: Apache-2.0
//
// Filter-facing state and measurement types: the SE_4(3) floating-base
// state, IMU / leg-kinematics / contact-force samples, the right-invariant
// observation vectors, and the sigmoid contact model.

#pragma once

#include "inekformer/lie.hpp"

namespace ikf {

// State columns: velocity, position, left contact, right contact.
inline constexpr int kNumStateColumns = 4;
inline constexpr int kColVel = 0;
inline constexpr int kColPos = 1;
inline constexpr int kColContactLeft = 2;
inline constexpr int kColContactRight = 3;

using StateElement = GroupElement<kNumStateColumns>;
using Twist15 = StateElement::Twist;
using Mat7 = StateElement::Dense;
using Vec7 = Eigen::Matrix<double, 7, 1>;

/// Floating-base state: rotation, velocity, position and both foot
/// contact positions in world coordinates, plus a timestamp.
struct FilterState {
  StateElement x;
  double t = 0.0;

  const Rotation& rot() const { return x.rot; }
  Vec3 vel() const { return x.col(kColVel); }
  Vec3 pos() const { return x.col(kColPos); }
  Vec3 contact_left() const { return x.col(kColContactLeft); }
  Vec3 contact_right() const { return x.col(kColContactRight); }

  void set_vel(const Vec3& v) { x.cols.col(kColVel) = v; }
  void set_pos(const Vec3& p) { x.cols.col(kColPos) = p; }
  void set_contact_left(const Vec3& c) { x.cols.col(kColContactLeft) = c; }
  void set_contact_right(const Vec3& c) { x.cols.col(kColContactRight) = c; }
};

/// Body-frame angular rate and specific force.
struct ImuSample {
  Vec3 gyro = Vec3::Zero();   // rad/s
  Vec3 accel = Vec3::Zero();  // m/s^2
  double t = 0.0;
};

/// Forward-kinematics foot positions in the floating-base frame.
struct LegObservation {
  Vec3 h_left = Vec3::Zero();   // m
  Vec3 h_right = Vec3::Zero();  // m
  double t = 0.0;
};

/// Local z-axis foot forces, negative under load.
struct ContactForces {
  double fz_left = 0.0;  // N
  double fz_right = 0.0;
};

/// Continuous per-foot contact weights in [0, 1].
struct ContactState {
  double mu_left = 0.0;
  double mu_right = 0.0;
};

enum class Foot { kLeft, kRight };

/// Right-invariant observation vector [h, 0, 1, s_L, s_R] with -1 in the
/// column of the observed contact, so that the top rows of X*Y come out as
/// R*h + p - c_foot.
Vec7 observation_vector(const Vec3& h, Foot side);

/// First three entries of dense(X) * y.
Vec3 innovation(const FilterState& x, const Vec7& y);

/// Sigmoid contact weight mu = 1 - 1/(1 + e^{-(F_T + fz)}), F_T = 50 N.
/// Requires the negative-under-load force convention: strong load gives
/// mu -> 1, an unloaded foot gives mu ~ 0.
double contact_probability(double fz);

inline constexpr double kContactForceThreshold = 50.0;  // N

}  // namespace ikf
