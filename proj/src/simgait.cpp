// SPDX-License-Identifier: Apache-2.0

#include "inekformer/simgait.hpp"

#include <cmath>
#include <numbers>
#include <random>
#include <stdexcept>

namespace ikf {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

double smoothstep5(double u) {
  u = std::clamp(u, 0.0, 1.0);
  return u * u * u * (10.0 + u * (-15.0 + 6.0 * u));
}

// Horizontal cycloid progress and vertical lift profile; both have zero
// slope at the endpoints.
double cycloid_progress(double u) { return u - std::sin(kTwoPi * u) / kTwoPi; }
double cycloid_height(double u) { return 0.5 * (1.0 - std::cos(kTwoPi * u)); }

Mat3 yaw_rotation(double psi) {
  Mat3 r;
  const double c = std::cos(psi), s = std::sin(psi);
  // clang-format off
  r << c, -s, 0,
       s,  c, 0,
       0,  0, 1;
  // clang-format on
  return r;
}

struct Pose {
  Vec3 base = Vec3::Zero();
  Mat3 rot = Mat3::Identity();
  Vec3 foot_left = Vec3::Zero();
  Vec3 foot_right = Vec3::Zero();
  bool stance_left = true;
  bool stance_right = true;
};

// Kinematic plan for one trajectory; all evaluations are closed-form in t.
class GaitPlan {
 public:
  explicit GaitPlan(const GaitParams& p) : p_(p) {
    if (!(p.dt > 0.0)) throw std::invalid_argument("gait: dt must be > 0");
    if (!(p.duty_factor > 0.5 && p.duty_factor < 1.0))
      throw std::invalid_argument("gait: duty_factor must be in (0.5, 1)");
    swing_ = 2.0 * p.step_duration * (1.0 - p.duty_factor);
    ds_ = p.step_duration - swing_;

    // Per-step foot plan for walk (x positions) and turn (yaw angles).
    foot_l_.push_back(0.0);
    foot_r_.push_back(0.0);
    for (int k = 0; k < p.n_steps; ++k) {
      double l = foot_l_.back(), r = foot_r_.back();
      if (k % 2 == 0)
        l = r + advance_per_step();
      else
        r = l + advance_per_step();
      foot_l_.push_back(l);
      foot_r_.push_back(r);
    }
    for (size_t i = 0; i < foot_l_.size(); ++i)
      mid_.push_back(0.5 * (foot_l_[i] + foot_r_[i]));
  }

  double duration() const {
    return p_.lead_in + p_.n_steps * p_.step_duration + kTail;
  }

  Pose at(double t) const {
    switch (p_.motion) {
      case Motion::kWalk: return stepping_pose(t, /*turning=*/false);
      case Motion::kTurn: return stepping_pose(t, /*turning=*/true);
      case Motion::kSquat: return oscillation_pose(t, Motion::kSquat);
      case Motion::kSway: return oscillation_pose(t, Motion::kSway);
      case Motion::kBalance: return balance_pose(t);
    }
    return Pose{};
  }

 private:
  static constexpr double kTail = 0.2;  // s hold after the last step

  double advance_per_step() const {
    return p_.motion == Motion::kTurn ? p_.turn_angle : p_.step_length;
  }

  double sway(double t) const {
    const double cycle = 2.0 * p_.step_duration;
    const double tm = t - p_.lead_in;
    if (tm <= 0.0) return 0.0;
    return p_.sway_amplitude * smoothstep5(tm / cycle) *
           std::sin(kTwoPi * tm / cycle);
  }

  Vec3 nominal_foot(bool left, double plan_value, bool turning) const {
    const Vec3 offset(0.0, (left ? 0.5 : -0.5) * p_.stance_width, 0.0);
    if (turning) return yaw_rotation(plan_value) * offset;
    return Vec3(plan_value, 0.0, 0.0) + offset;
  }

  Pose stepping_pose(double t, bool turning) const {
    Pose pose;
    const double tm = t - p_.lead_in;
    int k = 0;
    double tau = 0.0;
    if (tm >= 0.0) {
      k = std::min(static_cast<int>(tm / p_.step_duration), p_.n_steps - 1);
      tau = std::min(tm - k * p_.step_duration, p_.step_duration);
    } else {
      tau = -1.0;  // still in the lead-in hold
    }

    const bool left_swings = (k % 2 == 0);
    const double start_l = foot_l_[k], start_r = foot_r_[k];
    const double end_l = foot_l_[k + 1], end_r = foot_r_[k + 1];

    double u = 0.0;
    if (tau >= ds_) u = std::clamp((tau - ds_) / swing_, 0.0, 1.0);
    const bool in_swing = tau >= ds_ && u < 1.0;

    double plan_l = start_l, plan_r = start_r, lift_l = 0.0, lift_r = 0.0;
    if (left_swings) {
      plan_l = start_l + (end_l - start_l) * cycloid_progress(u);
      lift_l = p_.step_height * cycloid_height(u);
      pose.stance_left = !in_swing;
    } else {
      plan_r = start_r + (end_r - start_r) * cycloid_progress(u);
      lift_r = p_.step_height * cycloid_height(u);
      pose.stance_right = !in_swing;
    }
    pose.foot_left = nominal_foot(true, plan_l, turning) + Vec3(0, 0, lift_l);
    pose.foot_right =
        nominal_foot(false, plan_r, turning) + Vec3(0, 0, lift_r);

    const double base_plan = mid_[k] + (mid_[k + 1] - mid_[k]) * smoothstep5(u);
    if (turning) {
      pose.rot = yaw_rotation(base_plan);
      pose.base = Vec3(0.0, sway(t), p_.base_height);
    } else {
      pose.base = Vec3(base_plan, sway(t), p_.base_height);
    }
    return pose;
  }

  Pose oscillation_pose(double t, Motion motion) const {
    Pose pose;
    pose.foot_left = Vec3(0.0, 0.5 * p_.stance_width, 0.0);
    pose.foot_right = Vec3(0.0, -0.5 * p_.stance_width, 0.0);
    const double period = 2.0 * p_.step_duration;
    const double tm = t - p_.lead_in;
    double bob = 0.0;
    if (tm > 0.0 && motion == Motion::kSquat)
      bob = p_.step_height * smoothstep5(tm / period) *
            0.5 * (1.0 - std::cos(kTwoPi * tm / period));
    pose.base = Vec3(0.0, sway(t), p_.base_height - bob);
    return pose;
  }

  Pose balance_pose(double t) const {
    Pose pose;
    pose.foot_left = Vec3(0.0, 0.5 * p_.stance_width, 0.0);
    pose.foot_right = Vec3(0.0, -0.5 * p_.stance_width, p_.step_height);
    pose.stance_right = false;
    pose.base = Vec3(0.0, 0.25 * p_.stance_width + sway(t), p_.base_height);
    return pose;
  }

  GaitParams p_;
  double swing_ = 0.0;
  double ds_ = 0.0;
  std::vector<double> foot_l_, foot_r_, mid_;
};

// Inverts the discrete strapdown update between two ground-truth samples.
// Used identically by the generator (to build the consistent velocity
// sequence) and by synthesize_imu, so the streams agree bit-for-bit.
struct StrapdownInversion {
  Vec3 omega;
  Vec3 accel;
};

StrapdownInversion invert_strapdown(const Mat3& r_prev, const Vec3& p_prev,
                                    const Vec3& v_prev, const Mat3& r_cur,
                                    const Vec3& p_cur, double dt) {
  const Vec3 phi = so3_log(Rotation::from_matrix(r_prev.transpose() * r_cur));
  const Vec3 rhs =
      (p_cur - p_prev - v_prev * dt - 0.5 * kGravityVec * dt * dt) / (dt * dt);
  return {phi / dt, (r_prev * gamma2(phi)).inverse() * rhs};
}

std::uint64_t stream_seed(std::uint64_t seed, std::uint64_t tag) {
  return seed * 0x9e3779b97f4a7c15ULL + tag;
}

}  // namespace

Motion motion_from_string(const std::string& name) {
  if (name == "walk") return Motion::kWalk;
  if (name == "squat") return Motion::kSquat;
  if (name == "turn") return Motion::kTurn;
  if (name == "sway") return Motion::kSway;
  if (name == "balance") return Motion::kBalance;
  throw std::invalid_argument("unknown motion: " + name);
}

std::string to_string(Motion m) {
  switch (m) {
    case Motion::kWalk: return "walk";
    case Motion::kSquat: return "squat";
    case Motion::kTurn: return "turn";
    case Motion::kSway: return "sway";
    case Motion::kBalance: return "balance";
  }
  return "walk";
}

SensorNoise SensorNoise::preset_default(std::uint64_t seed) {
  SensorNoise n;
  n.sigma_gyro = 5e-4;
  n.sigma_accel = 5e-3;
  n.bias_gyro = Vec3(2e-3, -1.5e-3, 1e-3);
  n.bias_accel = Vec3(0.02, -0.01, 0.015);
  n.sigma_fk = 0.002;
  n.force_noise = 2.0;
  n.seed = seed;
  return n;
}

std::vector<GroundTruthFrame> generate_ground_truth(const GaitParams& params) {
  const GaitPlan plan(params);

  // Timeline, optionally with per-step jitter.
  std::vector<double> times{0.0};
  std::mt19937_64 rng(params.jitter_seed);
  std::uniform_real_distribution<double> jitter(-params.dt_jitter,
                                                params.dt_jitter);
  while (times.back() < plan.duration()) {
    double dt = params.dt;
    if (params.dt_jitter > 0.0) dt *= 1.0 + jitter(rng);
    times.push_back(times.back() + dt);
  }

  std::vector<GroundTruthFrame> frames(times.size());
  for (size_t i = 0; i < times.size(); ++i) {
    const Pose pose = plan.at(times[i]);
    GroundTruthFrame& f = frames[i];
    f.t = times[i];
    f.foot_left = pose.foot_left;
    f.foot_right = pose.foot_right;
    f.stance_left = pose.stance_left;
    f.stance_right = pose.stance_right;
    f.x_gt.t = times[i];
    f.x_gt.x.rot = Rotation::from_matrix(pose.rot);
    f.x_gt.set_pos(pose.base);
    f.x_gt.set_contact_left(pose.foot_left);
    f.x_gt.set_contact_right(pose.foot_right);
  }

  // Discrete-consistent velocity: start at rest, integrate the inverted
  // strapdown accelerations so that state propagation reproduces the ground
  // truth exactly on noise-free data.
  frames[0].x_gt.set_vel(Vec3::Zero());
  for (size_t i = 1; i < frames.size(); ++i) {
    const auto& prev = frames[i - 1].x_gt;
    const double dt = frames[i].t - frames[i - 1].t;
    const auto inv = invert_strapdown(prev.rot().matrix(), prev.pos(),
                                      prev.vel(), frames[i].x_gt.rot().matrix(),
                                      frames[i].x_gt.pos(), dt);
    const Vec3 phi = inv.omega * dt;
    frames[i].x_gt.set_vel(prev.vel() + kGravityVec * dt +
                           prev.rot().matrix() * (gamma1(phi) * inv.accel) *
                               dt);
  }
  return frames;
}

std::vector<ImuSample> synthesize_imu(
    const std::vector<GroundTruthFrame>& frames, const SensorNoise& noise) {
  if (frames.size() < 3)
    throw std::invalid_argument("synthesize_imu: need at least 3 frames");

  std::mt19937_64 rng(stream_seed(noise.seed, 1));
  std::normal_distribution<double> randn(0.0, 1.0);

  std::vector<ImuSample> samples(frames.size());
  for (size_t i = 0; i < frames.size(); ++i) {
    const size_t prev = i == 0 ? 0 : i - 1;
    const double dt =
        i == 0 ? frames[1].t - frames[0].t : frames[i].t - frames[prev].t;
    const auto& xp = frames[prev].x_gt;
    const auto inv =
        invert_strapdown(xp.rot().matrix(), xp.pos(), xp.vel(),
                         frames[i].x_gt.rot().matrix(), frames[i].x_gt.pos(),
                         dt);
    ImuSample& s = samples[i];
    s.t = frames[i].t;
    s.gyro = inv.omega;
    s.accel = inv.accel;

    const double sqrt_fs = std::sqrt(1.0 / dt);
    Vec3 wg, wa;
    for (int k = 0; k < 3; ++k) wg[k] = randn(rng);
    for (int k = 0; k < 3; ++k) wa[k] = randn(rng);
    s.gyro += noise.bias_gyro + noise.sigma_gyro * sqrt_fs * wg;
    s.accel += noise.bias_accel + noise.sigma_accel * sqrt_fs * wa;
  }
  return samples;
}

std::vector<LegObservation> synthesize_leg_obs(
    const std::vector<GroundTruthFrame>& frames, const SensorNoise& noise) {
  std::mt19937_64 rng(stream_seed(noise.seed, 2));
  std::normal_distribution<double> randn(0.0, 1.0);

  std::vector<LegObservation> out(frames.size());
  for (size_t i = 0; i < frames.size(); ++i) {
    const auto& x = frames[i].x_gt;
    const Mat3 rt = x.rot().matrix().transpose();
    out[i].t = frames[i].t;
    out[i].h_left = rt * (frames[i].foot_left - x.pos());
    out[i].h_right = rt * (frames[i].foot_right - x.pos());
    for (int k = 0; k < 3; ++k) out[i].h_left[k] += noise.sigma_fk * randn(rng);
    for (int k = 0; k < 3; ++k)
      out[i].h_right[k] += noise.sigma_fk * randn(rng);
  }
  return out;
}

std::vector<ContactForces> synthesize_contact_forces(
    const std::vector<GroundTruthFrame>& frames, double robot_mass,
    const SensorNoise& noise) {
  if (robot_mass <= 0.0)
    throw std::invalid_argument("synthesize_contact_forces: mass must be > 0");

  const double total = -robot_mass * kGravity;
  const size_t n = frames.size();
  std::vector<double> weight_left(n, 0.0);  // fraction of load on the left

  size_t i = 0;
  while (i < n) {
    if (!(frames[i].stance_left && frames[i].stance_right)) {
      weight_left[i] = frames[i].stance_left ? 1.0 : 0.0;
      ++i;
      continue;
    }
    // Maximal double-support run [i, j).
    size_t j = i;
    while (j < n && frames[j].stance_left && frames[j].stance_right) ++j;

    double w_start = 0.5;
    if (i > 0) w_start = frames[i - 1].stance_left ? 1.0 : 0.0;
    double w_end = 0.5;
    if (j < n) w_end = frames[j].stance_left ? 1.0 : 0.0;

    const double t0 = frames[i].t;
    const double t1 = j < n ? frames[j].t : frames[j - 1].t;
    for (size_t k = i; k < j; ++k) {
      const double u = t1 > t0 ? (frames[k].t - t0) / (t1 - t0) : 1.0;
      weight_left[k] = w_start + (w_end - w_start) * smoothstep5(u);
    }
    i = j;
  }

  std::mt19937_64 rng(stream_seed(noise.seed, 3));
  std::normal_distribution<double> randn(0.0, 1.0);
  std::vector<ContactForces> out(n);
  for (size_t k = 0; k < n; ++k) {
    const double load_l = frames[k].stance_left ? weight_left[k] * total : 0.0;
    const double load_r =
        frames[k].stance_right ? (1.0 - weight_left[k]) * total : 0.0;
    out[k].fz_left = load_l + noise.force_noise * randn(rng);
    out[k].fz_right = load_r + noise.force_noise * randn(rng);
  }
  return out;
}

std::vector<TrajectoryRecord> synthesize_trajectory(const GaitParams& params,
                                                    const SensorNoise& noise,
                                                    double robot_mass) {
  const auto frames = generate_ground_truth(params);
  const auto imu = synthesize_imu(frames, noise);
  const auto legs = synthesize_leg_obs(frames, noise);
  const auto forces = synthesize_contact_forces(frames, robot_mass, noise);

  std::vector<TrajectoryRecord> records(frames.size());
  for (size_t i = 0; i < frames.size(); ++i) {
    TrajectoryRecord& r = records[i];
    const auto& x = frames[i].x_gt;
    r.t = frames[i].t;
    r.gyro = imu[i].gyro;
    r.accel = imu[i].accel;
    r.h_left = legs[i].h_left;
    r.h_right = legs[i].h_right;
    r.fz_left = forces[i].fz_left;
    r.fz_right = forces[i].fz_right;
    Eigen::Quaterniond q(x.rot().matrix());
    q.normalize();
    if (q.w() < 0.0) q.coeffs() *= -1.0;
    r.quat_wxyz = Eigen::Vector4d(q.w(), q.x(), q.y(), q.z());
    r.vel = x.vel();
    r.pos = x.pos();
    r.contact_left = x.contact_left();
    r.contact_right = x.contact_right();
  }
  return records;
}

}  // namespace ikf
