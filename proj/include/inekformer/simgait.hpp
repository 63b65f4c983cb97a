// SPDX-License-Identifier: Apache-2.0
//
// Synthetic bipedal gait generator: ground-truth floating-base trajectories
// with alternating foot contacts for five motion types, plus consistent
// noisy sensor streams (IMU, leg kinematics, contact forces).
//
// The IMU stream is synthesized to be exactly consistent with the discrete
// strapdown model: the angular rate is the log of the frame-to-frame
// rotation increment and the specific force inverts the position update, so
// noise-free propagation from a ground-truth state reproduces the next
// ground-truth state to machine precision. The stored ground-truth velocity
// is the matching discrete velocity (within O(dt^2) of the continuous
// derivative).

#pragma once

#include "inekformer/trajectory.hpp"

#include <string>
#include <vector>

namespace ikf {

enum class Motion { kWalk, kSquat, kTurn, kSway, kBalance };

Motion motion_from_string(const std::string& name);
std::string to_string(Motion m);

struct GaitParams {
  double step_length = 0.15;    // m
  double step_height = 0.05;    // m
  double step_duration = 0.7;   // s per step
  double duty_factor = 0.65;    // stance fraction of a gait cycle, (0.5, 1)
  double sway_amplitude = 0.02; // m lateral
  double base_height = 0.85;    // m
  double stance_width = 0.2;    // m between feet centers
  double turn_angle = 0.15;     // rad per step (turn motion)
  double lead_in = 0.5;         // s static hold before the motion
  int n_steps = 12;
  double dt = 1.0 / 150.0;      // s
  double dt_jitter = 0.0;       // fractional per-step perturbation, e.g. 0.2
  std::uint64_t jitter_seed = 0;
  Motion motion = Motion::kWalk;
};

struct SensorNoise {
  double sigma_gyro = 0.0;   // rad/s/sqrt(Hz)
  double sigma_accel = 0.0;  // m/s^2/sqrt(Hz)
  Vec3 bias_gyro = Vec3::Zero();   // rad/s
  Vec3 bias_accel = Vec3::Zero();  // m/s^2
  double sigma_fk = 0.0;     // m
  double force_noise = 0.0;  // N
  std::uint64_t seed = 0;

  static SensorNoise none() { return SensorNoise{}; }
  static SensorNoise preset_default(std::uint64_t seed);
};

struct GroundTruthFrame {
  FilterState x_gt;
  Vec3 foot_left = Vec3::Zero();   // world
  Vec3 foot_right = Vec3::Zero();  // world
  bool stance_left = true;
  bool stance_right = true;
  double t = 0.0;
};

/// Zero-slip ground truth: a stance foot's world position is constant over
/// its stance interval; the base trajectory is C2-continuous.
std::vector<GroundTruthFrame> generate_ground_truth(const GaitParams& params);

std::vector<ImuSample> synthesize_imu(
    const std::vector<GroundTruthFrame>& frames, const SensorNoise& noise);

std::vector<LegObservation> synthesize_leg_obs(
    const std::vector<GroundTruthFrame>& frames, const SensorNoise& noise);

/// Negative-under-load z forces: -m g on a single stance foot, a smooth
/// ramped split over double support.
std::vector<ContactForces> synthesize_contact_forces(
    const std::vector<GroundTruthFrame>& frames, double robot_mass,
    const SensorNoise& noise);

inline constexpr double kDefaultRobotMass = 60.0;  // kg

/// Full pipeline: ground truth plus all sensor streams as records.
std::vector<TrajectoryRecord> synthesize_trajectory(
    const GaitParams& params, const SensorNoise& noise,
    double robot_mass = kDefaultRobotMass);

}  // namespace ikf
