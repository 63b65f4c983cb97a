// SPDX-License-Identifier: Apache-2.0
//
// The hybrid filter loop: strapdown propagation, feature window
// maintenance, transformer gain inference with contact masking, and the
// shared Lie-exponential correction. Runs with the analytic gain while the
// feature window fills (no padding); without a model it is the plain
// analytic InEKF over trajectory records.

#pragma once

#include "inekformer/checkpoint.hpp"
#include "inekformer/gainformer.hpp"
#include "inekformer/metrics.hpp"
#include "inekformer/trajectory.hpp"

#include <optional>

namespace ikf {

enum class FilterMode { kAutoregressive, kOneStepAhead };

std::string to_string(FilterMode m);
FilterMode filter_mode_from_string(const std::string& name);

/// One engine step; exposes everything training needs to differentiate
/// through the gain.
struct HybridStepResult {
  FilterState corrected;
  FilterState propagated;
  ContactState mu;
  Vec7 y_left, y_right;
  bool used_model = false;
  GainMatrix raw_gain;        // model output before masking (model steps)
  ForwardTrace trace;         // model steps only
  double step_ms = 0.0;       // features + forward + mask + correct
};

class HybridFilter {
 public:
  /// params/scaler may be null for the analytic baseline. When params is
  /// set, features are computed from step 1 on and the model takes over as
  /// soon as the window is full.
  HybridFilter(const ModelParams* params, const ScalerParams* scaler,
               const NoiseParams& noise, const FilterState& x0,
               const Covariance& p0);

  HybridStepResult step(const TrajectoryRecord& record);

  /// Replaces the state fed into the next step (and the feature context);
  /// used for one-step-ahead evaluation and teacher forcing.
  void reset_feedback(const FilterState& state);

  const FilterState& state() const { return x_; }
  const Covariance& covariance() const { return p_; }

  /// Raw (unscaled) feature frame of the last step, if one was computed.
  const std::optional<FeatureFrame>& last_raw_frame() const {
    return last_raw_frame_;
  }

 private:
  const ModelParams* params_;
  const ScalerParams* scaler_;
  NoiseParams noise_;
  FilterState x_;
  Covariance p_;
  GainMatrix last_gain_;
  FeatureHistory history_;
  FilterState prev_corr_, prev2_corr_;
  std::pair<Vec7, Vec7> y_prev_;
  std::optional<FeatureFrame> last_raw_frame_;
  bool started_ = false;
  bool model_engaged_ = false;
  long steps_taken_ = 0;
};

struct HybridRunResult {
  std::vector<FilterState> estimates;
  RunReport report;
};

/// Full run over records. x0 defaults to the first record's ground truth.
/// In one-step-ahead mode the state is reset to ground truth after every
/// step. RMSE is computed against the records' ground truth.
HybridRunResult run_hybrid_filter(const std::vector<TrajectoryRecord>& records,
                                  const Checkpoint* ckpt, FilterMode mode,
                                  const NoiseParams& noise);

struct CompareResult {
  HybridRunResult inekf;
  HybridRunResult inekformer;
};

/// Runs both filters in one-step-ahead mode over identical propagated
/// inputs; the shared propagation is witnessed by equal stream checksums in
/// the two reports.
CompareResult compare_filters(const std::vector<TrajectoryRecord>& records,
                              const Checkpoint& ckpt,
                              const NoiseParams& noise);

/// Plot-ready CSV (t, gt_x, gt_y, est_x, est_y) rows for a run.
std::string tracks_csv(const std::vector<TrajectoryRecord>& records,
                       const std::vector<FilterState>& inekf_estimates,
                       const std::vector<FilterState>& hybrid_estimates);

}  // namespace ikf
