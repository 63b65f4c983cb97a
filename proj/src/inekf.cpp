// SPDX-License-Identifier: Apache-2.0

#include "inekformer/inekf.hpp"

#include <stdexcept>

namespace ikf {

namespace {

Covariance symmetrize(const Covariance& p) {
  return 0.5 * (p + p.transpose());
}

}  // namespace

Covariance default_initial_covariance() {
  Covariance p = Covariance::Zero();
  p.block<3, 3>(0, 0) = 1e-4 * Mat3::Identity();   // orientation
  p.block<3, 3>(3, 3) = 1e-3 * Mat3::Identity();   // velocity
  p.block<3, 3>(6, 6) = 1e-4 * Mat3::Identity();   // position
  p.block<3, 3>(9, 9) = 1e-4 * Mat3::Identity();   // contacts
  p.block<3, 3>(12, 12) = 1e-4 * Mat3::Identity();
  return p;
}

FilterState propagate_state(const FilterState& x, const ImuSample& u,
                            double dt) {
  if (!(dt > 0.0) || dt > 0.1)
    throw std::invalid_argument("propagate_state: dt must be in (0, 0.1]");

  const Vec3 phi = u.gyro * dt;
  const Mat3 r = x.rot().matrix();

  FilterState out = x;
  out.x.rot = x.rot() * so3_exp(phi);
  out.set_vel(x.vel() + kGravityVec * dt + r * (gamma1(phi) * u.accel) * dt);
  out.set_pos(x.pos() + x.vel() * dt + 0.5 * kGravityVec * dt * dt +
              r * (gamma2(phi) * u.accel) * dt * dt);
  out.t = x.t + dt;
  return out;
}

Covariance propagate_covariance(const Covariance& p, const FilterState& x,
                                double dt, const NoiseParams& noise,
                                const ContactState& mu) {
  Covariance a = Covariance::Zero();
  a.block<3, 3>(3, 0) = skew(kGravityVec);
  a.block<3, 3>(6, 3) = Mat3::Identity();
  const Covariance phi = Covariance::Identity() + a * dt;

  const Mat3 r = x.rot().matrix();
  Covariance q = Covariance::Zero();
  q.block<3, 3>(0, 0) = r * noise.gyro_var.asDiagonal() * r.transpose();
  q.block<3, 3>(3, 3) = r * noise.accel_var.asDiagonal() * r.transpose();
  const double q_left = mu.mu_left < 0.5 ? noise.swing_var : noise.contact_var;
  const double q_right =
      mu.mu_right < 0.5 ? noise.swing_var : noise.contact_var;
  q.block<3, 3>(9, 9) = q_left * Mat3::Identity();
  q.block<3, 3>(12, 12) = q_right * Mat3::Identity();

  return symmetrize(phi * p * phi.transpose() + q * dt);
}

// Jacobian of the innovation with respect to the right-invariant error xi
// (truth = exp(xi) * estimate): z_i = dc_i - dp. The sign pairs with the
// left-multiplied correction exp(K z) and K = P H^T S^{-1}.
Eigen::Matrix<double, 6, 15> observation_matrix() {
  Eigen::Matrix<double, 6, 15> h = Eigen::Matrix<double, 6, 15>::Zero();
  h.block<3, 3>(0, 6) = -Mat3::Identity();
  h.block<3, 3>(0, 9) = Mat3::Identity();
  h.block<3, 3>(3, 6) = -Mat3::Identity();
  h.block<3, 3>(3, 12) = Mat3::Identity();
  return h;
}

GainOutcome analytic_gain(const Covariance& p, const ContactState& /*mu*/,
                          const NoiseParams& noise, const FilterState& x,
                          const GainMatrix& previous) {
  const auto h = observation_matrix();
  const Mat3 r = x.rot().matrix();
  const Mat3 n = r * noise.obs_var.asDiagonal() * r.transpose();

  Eigen::Matrix<double, 6, 6> s = h * p * h.transpose();
  s.block<3, 3>(0, 0) += n;
  s.block<3, 3>(3, 3) += n;
  s = 0.5 * (s + s.transpose());

  Eigen::SelfAdjointEigenSolver<Eigen::Matrix<double, 6, 6>> eig(s);
  const double lo = eig.eigenvalues().minCoeff();
  const double hi = eig.eigenvalues().maxCoeff();
  if (!(lo > 0.0) || hi / lo > 1e12) return {previous, true};

  GainOutcome out;
  out.gain.k = p * h.transpose() * eig.eigenvectors() *
               eig.eigenvalues().cwiseInverse().asDiagonal() *
               eig.eigenvectors().transpose();
  return out;
}

Twist15 correction_twist(const FilterState& x, const GainMatrix& k,
                         const Vec7& y_left, const Vec7& y_right,
                         const ContactState& mu) {
  Twist15 xi = Twist15::Zero();
  if (mu.mu_left != 0.0)
    xi += (mu.mu_left * k.left()) * innovation(x, y_left);
  if (mu.mu_right != 0.0)
    xi += (mu.mu_right * k.right()) * innovation(x, y_right);
  return xi;
}

FilterState correct(const FilterState& x, const GainMatrix& k,
                    const Vec7& y_left, const Vec7& y_right,
                    const ContactState& mu) {
  const Twist15 xi = correction_twist(x, k, y_left, y_right, mu);
  if (xi.isZero(0.0)) return x;
  FilterState out = x;
  out.x = StateElement::exp(xi).compose(x.x);
  return out;
}

Covariance correct_covariance(const Covariance& p, const GainMatrix& k,
                              const ContactState& mu, const NoiseParams& noise,
                              const FilterState& x) {
  GainMatrix masked;
  masked.left() = mu.mu_left * k.left();
  masked.right() = mu.mu_right * k.right();

  const auto h = observation_matrix();
  const Covariance ikh = Covariance::Identity() - masked.k * h;

  const Mat3 r = x.rot().matrix();
  const Mat3 n = r * noise.obs_var.asDiagonal() * r.transpose();
  Eigen::Matrix<double, 6, 6> nbar = Eigen::Matrix<double, 6, 6>::Zero();
  nbar.block<3, 3>(0, 0) = n;
  nbar.block<3, 3>(3, 3) = n;

  return symmetrize(ikh * p * ikh.transpose() +
                    masked.k * nbar * masked.k.transpose());
}

const FilterState& Inekf::step(const FilterInput& input) {
  const double dt = input.t - x_.t;
  const ContactState mu{contact_probability(input.forces.fz_left),
                        contact_probability(input.forces.fz_right)};
  if (dt != 0.0) {
    FilterState prop = propagate_state(x_, input.imu, dt);
    p_ = propagate_covariance(p_, x_, dt, noise_, mu);
    x_ = prop;
  }

  const FilterState prop = x_;
  const GainOutcome g = analytic_gain(p_, mu, noise_, prop, last_gain_);
  last_gain_ = g.gain;
  degraded_ = g.degraded;

  const Vec7 y_l = observation_vector(input.legs.h_left, Foot::kLeft);
  const Vec7 y_r = observation_vector(input.legs.h_right, Foot::kRight);
  x_ = correct(prop, g.gain, y_l, y_r, mu);
  p_ = correct_covariance(p_, g.gain, mu, noise_, prop);
  return x_;
}

std::vector<FilterState> run_inekf(const std::vector<FilterInput>& inputs,
                                   const NoiseParams& noise,
                                   const FilterState& x0,
                                   const Covariance& p0) {
  Inekf filter(x0, p0, noise);
  std::vector<FilterState> out;
  out.reserve(inputs.size());
  for (size_t i = 0; i < inputs.size(); ++i) {
    try {
      out.push_back(filter.step(inputs[i]));
    } catch (const std::exception& e) {
      throw std::runtime_error("run_inekf: record " + std::to_string(i) +
                               ": " + e.what());
    }
  }
  return out;
}

}  // namespace ikf
