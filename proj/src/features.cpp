// SPDX-License-Identifier: Apache-2.0

#include "inekformer/features.hpp"

#include <algorithm>
#include <stdexcept>

namespace ikf {

Eigen::Matrix<double, kScaledFeatureDim, 1> FeatureFrame::scaled_dims() const {
  Eigen::Matrix<double, kScaledFeatureDim, 1> v;
  v << obs_diff, innovation_pair, evolution_diff, update_diff;
  return v;
}

void FeatureFrame::set_scaled_dims(
    const Eigen::Matrix<double, kScaledFeatureDim, 1>& v) {
  obs_diff = v.segment<6>(0);
  innovation_pair = v.segment<6>(6);
  evolution_diff = v.segment<21>(12);
  update_diff = v.segment<21>(33);
}

Eigen::Matrix<double, kObsFeatureDim, 1> FeatureFrame::encoder_input() const {
  Eigen::Matrix<double, kObsFeatureDim, 1> v;
  v << obs_diff, innovation_pair;
  return v;
}

Eigen::Matrix<double, kStateFeatureDim, 1> FeatureFrame::decoder_input()
    const {
  Eigen::Matrix<double, kStateFeatureDim, 1> v;
  v << evolution_diff, update_diff;
  return v;
}

FeatureFrame::Vec21 flatten_top_block(const StateElement& g) {
  const Mat7 dense = g.dense();
  FeatureFrame::Vec21 v;
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 7; ++c) v[r * 7 + c] = dense(r, c);
  return v;
}

FeatureFrame compute_features(const FilterState& x_corr_prev,
                              const FilterState& x_corr_prev2,
                              const FilterState& x_prop,
                              const std::pair<Vec7, Vec7>& y_now,
                              const std::pair<Vec7, Vec7>& y_prev,
                              const ContactState& mu) {
  FeatureFrame f;
  f.t = x_prop.t;
  f.obs_diff.head<3>() = (y_now.first - y_prev.first).head<3>();
  f.obs_diff.tail<3>() = (y_now.second - y_prev.second).head<3>();
  f.innovation_pair.head<3>() = innovation(x_prop, y_now.first);
  f.innovation_pair.tail<3>() = innovation(x_prop, y_now.second);
  f.evolution_diff =
      flatten_top_block(x_corr_prev.x.compose(x_corr_prev2.x.inverse()));
  f.update_diff = flatten_top_block(x_corr_prev.x.compose(x_prop.x.inverse()));
  f.contact = Eigen::Vector2d(mu.mu_left, mu.mu_right);
  return f;
}

namespace {

// Linear-interpolation quantile over a copy of the values.
double quantile(std::vector<double> v, double q) {
  std::sort(v.begin(), v.end());
  const double pos = q * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<size_t>(pos);
  if (lo + 1 >= v.size()) return v.back();
  const double frac = pos - static_cast<double>(lo);
  return v[lo] + frac * (v[lo + 1] - v[lo]);
}

}  // namespace

ScalerParams fit_scaler(const std::vector<FeatureFrame>& frames, double q_low,
                        double q_high) {
  if (frames.empty())
    throw std::invalid_argument("fit_scaler: no frames");
  if (!(q_low >= 0.0 && q_low < q_high && q_high <= 1.0))
    throw std::invalid_argument("fit_scaler: need 0 <= q_low < q_high <= 1");

  ScalerParams params;
  params.q_low = q_low;
  params.q_high = q_high;
  std::vector<double> column(frames.size());
  for (int d = 0; d < kScaledFeatureDim; ++d) {
    for (size_t i = 0; i < frames.size(); ++i)
      column[i] = frames[i].scaled_dims()[d];
    params.center[d] = quantile(column, 0.5);
    const double range = quantile(column, q_high) - quantile(column, q_low);
    params.scale[d] = range < 1e-12 ? 1.0 : range;
  }
  return params;
}

FeatureFrame apply_scaler(const FeatureFrame& frame,
                          const ScalerParams& params) {
  FeatureFrame out = frame;
  out.set_scaled_dims((frame.scaled_dims() - params.center).cwiseQuotient(
      params.scale));
  return out;
}

void FeatureHistory::push(const FeatureFrame& frame) {
  frames_.push_back(frame);
  if (static_cast<int>(frames_.size()) > capacity_) frames_.pop_front();
}

std::vector<FeatureFrame> FeatureHistory::window() const {
  return {frames_.begin(), frames_.end()};
}

}  // namespace ikf
