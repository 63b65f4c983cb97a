// SPDX-License-Identifier: Apache-2.0
//
// Gain-estimator input features: per-step observation / innovation
// differences (12 dims), forward evolution / update differences flattened
// from the top 3x7 state-matrix blocks (42 dims), contact states, the
// robust scaler, and the fixed-length history window.

#pragma once

#include "inekformer/state.hpp"

#include <deque>
#include <vector>

namespace ikf {

inline constexpr int kObsFeatureDim = 12;    // f1 || f2
inline constexpr int kStateFeatureDim = 42;  // f3 || f4
inline constexpr int kScaledFeatureDim = 54; // everything but the contacts

/// One timestep of gain-estimator inputs.
struct FeatureFrame {
  using Vec6 = Eigen::Matrix<double, 6, 1>;
  using Vec21 = Eigen::Matrix<double, 21, 1>;

  Vec6 obs_diff = Vec6::Zero();         // f1: per-foot observation delta
  Vec6 innovation_pair = Vec6::Zero();  // f2: per-foot innovation
  Vec21 evolution_diff = Vec21::Zero(); // f3: X+_{t-1} (X+_{t-2})^{-1}
  Vec21 update_diff = Vec21::Zero();    // f4: X+_{t-1} X_t^{-1}
  Eigen::Vector2d contact = Eigen::Vector2d::Zero();  // f5
  double t = 0.0;

  /// The 54 scaler-covered dims in order f1, f2, f3, f4.
  Eigen::Matrix<double, kScaledFeatureDim, 1> scaled_dims() const;
  void set_scaled_dims(const Eigen::Matrix<double, kScaledFeatureDim, 1>& v);

  Eigen::Matrix<double, kObsFeatureDim, 1> encoder_input() const;
  Eigen::Matrix<double, kStateFeatureDim, 1> decoder_input() const;
};

/// Row-major flatten of the informative top 3x7 block of a group product.
FeatureFrame::Vec21 flatten_top_block(const StateElement& g);

/// Features for one step. States: previous and before-previous corrected
/// estimates plus the current propagated state; observations for the current
/// and previous step, left then right.
FeatureFrame compute_features(const FilterState& x_corr_prev,
                              const FilterState& x_corr_prev2,
                              const FilterState& x_prop,
                              const std::pair<Vec7, Vec7>& y_now,
                              const std::pair<Vec7, Vec7>& y_prev,
                              const ContactState& mu);

/// Robust scaler: per-dimension median and inter-quantile range over the
/// training set. Applies to f1..f4 only; contacts pass through.
struct ScalerParams {
  Eigen::Matrix<double, kScaledFeatureDim, 1> center =
      Eigen::Matrix<double, kScaledFeatureDim, 1>::Zero();
  Eigen::Matrix<double, kScaledFeatureDim, 1> scale =
      Eigen::Matrix<double, kScaledFeatureDim, 1>::Ones();
  double q_low = 0.05;
  double q_high = 0.95;
};

/// Throws std::invalid_argument on an empty frame set or bad quantiles.
/// Dimensions with an inter-quantile range below 1e-12 get scale 1.
ScalerParams fit_scaler(const std::vector<FeatureFrame>& frames, double q_low,
                        double q_high);

FeatureFrame apply_scaler(const FeatureFrame& frame,
                          const ScalerParams& params);

/// Ring buffer of the last n_history frames; emits a window only when full.
class FeatureHistory {
 public:
  explicit FeatureHistory(int n_history) : capacity_(n_history) {}

  void push(const FeatureFrame& frame);
  bool full() const { return static_cast<int>(frames_.size()) == capacity_; }
  int capacity() const { return capacity_; }
  void clear() { frames_.clear(); }

  /// Oldest-to-newest window; only valid when full().
  std::vector<FeatureFrame> window() const;

 private:
  int capacity_;
  std::deque<FeatureFrame> frames_;
};

}  // namespace ikf
