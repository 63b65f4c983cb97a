// SPDX-License-Identifier: Apache-2.0
//
// Model-based right-invariant EKF baseline: discrete strapdown propagation,
// covariance propagation with swing-foot inflation, analytic Kalman gain,
// and the Lie-exponential correction shared with the hybrid filter.

#pragma once

#include "inekformer/state.hpp"

#include <optional>
#include <vector>

namespace ikf {

inline constexpr double kGravity = 9.81;  // m/s^2, world z up
inline const Vec3 kGravityVec(0.0, 0.0, -kGravity);

/// 15x15 covariance over the right-invariant error
/// [dphi, dv, dp, dc_L, dc_R].
using Covariance = Eigen::Matrix<double, 15, 15>;

/// 15x6 Kalman gain [K_L | K_R].
struct GainMatrix {
  Eigen::Matrix<double, 15, 6> k = Eigen::Matrix<double, 15, 6>::Zero();

  auto left() { return k.block<15, 3>(0, 0); }
  auto right() { return k.block<15, 3>(0, 3); }
  auto left() const { return k.block<15, 3>(0, 0); }
  auto right() const { return k.block<15, 3>(0, 3); }

  static GainMatrix Zero() { return GainMatrix{}; }
};

/// Process / measurement noise. Variances; continuous-time PSDs for the
/// random-walk terms. Defaults are order-of-magnitude MEMS / leg-kinematics
/// values, overridable through the [noise] config section.
struct NoiseParams {
  Vec3 gyro_var = Vec3::Constant(1e-4);       // (rad/s)^2, sigma 0.01
  Vec3 accel_var = Vec3::Constant(1e-2);      // (m/s^2)^2, sigma 0.1
  double contact_var = 1e-4;                  // m^2/s, sigma 0.01
  double swing_var = 1e2;                     // m^2/s, sigma 10 = 1e3 * 0.01
  Vec3 obs_var = Vec3::Constant(2.5e-5);      // m^2, sigma 0.005
};

Covariance default_initial_covariance();

/// Strapdown propagation over one IMU interval. Throws std::invalid_argument
/// unless dt is in (0, 0.1].
FilterState propagate_state(const FilterState& x, const ImuSample& u,
                            double dt);

/// First-order discrete propagation P <- Phi P Phi^T + Qbar dt with
/// Phi = I + A dt. A feot with mu < 0.5 gets the inflated swing variance.
Covariance propagate_covariance(const Covariance& p, const FilterState& x,
                                double dt, const NoiseParams& noise,
                                const ContactState& mu);

struct GainOutcome {
  GainMatrix gain;
  bool degraded = false;  // innovation covariance was ill-conditioned
};

/// Standard right-invariant update gain K = P H^T (H P H^T + Nbar)^{-1}.
/// If the innovation covariance condition number exceeds 1e12 the previous
/// gain is returned with degraded set.
GainOutcome analytic_gain(const Covariance& p, const ContactState& mu,
                          const NoiseParams& noise, const FilterState& x,
                          const GainMatrix& previous = GainMatrix::Zero());

/// Lie-exponential correction X <- exp(xi) X with
/// xi = (mu_L K_L) z_L + (mu_R K_R) z_R. A foot with mu == 0 contributes
/// nothing, bit-exactly: its observation is never touched.
FilterState correct(const FilterState& x, const GainMatrix& k,
                    const Vec7& y_left, const Vec7& y_right,
                    const ContactState& mu);

/// Correction twist alone (shared by correct() and the training loss).
Twist15 correction_twist(const FilterState& x, const GainMatrix& k,
                         const Vec7& y_left, const Vec7& y_right,
                         const ContactState& mu);

/// Measurement Jacobian rows for both feet: z_i ~ dp - dc_i near a
/// consistent state.
Eigen::Matrix<double, 6, 15> observation_matrix();

/// Joseph-form covariance update with the contact-masked gain.
Covariance correct_covariance(const Covariance& p, const GainMatrix& k,
                              const ContactState& mu, const NoiseParams& noise,
                              const FilterState& x);

/// One full analytic-filter input record.
struct FilterInput {
  ImuSample imu;
  LegObservation legs;
  ContactForces forces;
  double t = 0.0;
};

/// Stateful analytic InEKF. Owns (x, P); single-threaded.
class Inekf {
 public:
  Inekf(const FilterState& x0, const Covariance& p0, const NoiseParams& noise)
      : x_(x0), p_(p0), noise_(noise) {}

  /// Propagate to input.t and correct with its observations. The first call
  /// with input.t == x.t skips propagation.
  const FilterState& step(const FilterInput& input);

  const FilterState& state() const { return x_; }
  const Covariance& covariance() const { return p_; }
  const GainMatrix& last_gain() const { return last_gain_; }
  bool degraded() const { return degraded_; }

  void set_state(const FilterState& x) { x_ = x; }

 private:
  FilterState x_;
  Covariance p_;
  NoiseParams noise_;
  GainMatrix last_gain_;
  bool degraded_ = false;
};

/// Runs the analytic filter over a time-ordered input sequence; one output
/// state per input. Throws with the record index on a bad time step.
std::vector<FilterState> run_inekf(const std::vector<FilterInput>& inputs,
                                   const NoiseParams& noise,
                                   const FilterState& x0,
                                   const Covariance& p0);

}  // namespace ikf
