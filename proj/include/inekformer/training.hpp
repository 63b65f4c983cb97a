// SPDX-License-Identifier: Apache-2.0
//
// Supervised training of the gain estimator: squared-Frobenius loss taken
// through the Lie-exponential correction, its analytic gradient with
// respect to the raw gain, truncated backpropagation through time with
// scheduled sampling, Adam with a one-cycle learning-rate schedule, and a
// seeded random hyperparameter search.

#pragma once

#include "inekformer/hybrid.hpp"

#include <functional>
#include <map>
#include <random>

namespace ikf {

enum class TrainMode { kTeacherForcing, kAutoregressive, kScheduled };

TrainMode train_mode_from_string(const std::string& name);
std::string to_string(TrainMode m);

struct SsSchedule {
  double midpoint = 10.0;   // epoch at which the feed-ground-truth
                            // probability crosses 0.5
  double steepness = 1.0;
};

struct AdamParams {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct TrainConfig {
  int truncation_len = 10;  // model-corrected steps per TBPTT window
  SsSchedule ss;
  double lr_max = 3e-3;
  long total_steps = 0;  // derived from epochs when 0
  double pct_warmup = 0.3;
  AdamParams adam;
  int batch_segments = 1;  // gradient-accumulation windows per Adam step
  TrainMode mode = TrainMode::kTeacherForcing;
  std::uint64_t seed = 0;
  double clip_norm = 1.0;
  double q_low = 0.05, q_high = 0.95;  // robust-scaler quantiles
  double val_fraction = 0.25;          // tail share of each trajectory
  int epochs = 20;
  int segment_stride = 0;  // 0: truncation_len
};

/// Squared Frobenius distance between the corrected state and ground truth,
/// restricted to the informative top 3x7 block (the constant bottom rows
/// cancel). The gain is masked with mu inside the correction.
double loss(const GainMatrix& k, const FilterState& x_prop, const Vec7& y_left,
            const Vec7& y_right, const ContactState& mu,
            const FilterState& x_gt);

/// Analytic d(loss)/d(raw gain) through the exponential (left-Jacobian
/// adjoint series) and the contact mask. finite_difference switches to the
/// forward-difference fallback on the correction twist (eps = 1e-7).
Eigen::Matrix<double, kGainRows, kGainCols> loss_gradient(
    const GainMatrix& k, const FilterState& x_prop, const Vec7& y_left,
    const Vec7& y_right, const ContactState& mu, const FilterState& x_gt,
    bool finite_difference = false);

/// Probability of feeding ground truth at the given epoch:
/// 1 / (1 + exp(steepness * (epoch - midpoint))).
double ss_probability(int epoch, const SsSchedule& ss);

/// One-cycle schedule: cosine rise from lr_max/25 to lr_max over the warmup
/// fraction, then cosine decay to lr_max/(25 * 1e4). Throws on a step
/// outside [0, total_steps].
double onecycle_lr(long step, const TrainConfig& cfg);

struct OptimizerState {
  std::vector<Eigen::VectorXd> m, v;
  long step = 0;
};

OptimizerState make_optimizer_state(const ModelParams& params);

/// Bias-corrected Adam update in place.
void adam_step(ModelParams& params, ModelParams& grads, OptimizerState& state,
               double lr, const AdamParams& adam);

/// Global-norm gradient clipping; returns the pre-clip norm.
double clip_gradients(ModelParams& grads, double max_norm);

struct TbpttMetrics {
  double window_loss = 0.0;  // mean per-step loss over the window
  double lr = 0.0;
  double feed_gt_probability = 0.0;
  int model_steps = 0;
  double grad_norm = 0.0;
};

/// Rolls the hybrid filter over one contiguous segment (length >=
/// n_history + truncation_len), accumulates the loss gradient over the
/// model-corrected steps, and applies one Adam step. The state fed back
/// after each step is ground truth with probability eps(epoch) under
/// scheduled sampling (always under teacher forcing, never when
/// autoregressive).
TbpttMetrics tbptt_ss_step(const std::vector<TrajectoryRecord>& segment,
                           ModelParams& params, OptimizerState& opt_state,
                           const TrainConfig& cfg, const ScalerParams& scaler,
                           const NoiseParams& noise, int epoch,
                           std::mt19937_64& rng);

struct MetricsRow {
  long step = 0;
  int epoch = 0;
  double lr = 0.0;
  double feed_gt_probability = 0.0;
  double train_loss = 0.0;
  double val_loss = 0.0;
};

struct TrainResult {
  ModelParams params;
  ScalerParams scaler;
  std::vector<MetricsRow> log;
  double initial_loss = 0.0;  // zero-gain baseline on the training windows
  double final_train_loss = 0.0;
  double final_val_loss = 0.0;
};

using EpochCallback =
    std::function<void(int epoch, const ModelParams&, const ScalerParams&)>;

/// Full training pipeline: split, scaler fit on teacher-forced features,
/// epoch loop over segments, per-epoch one-step validation loss.
TrainResult train_model(
    const std::vector<std::vector<TrajectoryRecord>>& trajectories,
    const ModelConfig& model_cfg, const TrainConfig& cfg,
    const NoiseParams& noise, const EpochCallback& on_epoch = nullptr);

/// Teacher-forced mean one-step loss of a model over records (model steps
/// only); used for validation.
double evaluate_one_step_loss(const std::vector<TrajectoryRecord>& records,
                              const ModelParams& params,
                              const ScalerParams& scaler,
                              const NoiseParams& noise);

// --- random hyperparameter search -----------------------------------------

struct SearchParam {
  enum class Kind { kLog, kLinear, kInt, kChoice };
  std::string name;
  Kind kind = Kind::kLinear;
  double min = 0.0, max = 1.0;
  std::vector<std::string> choices;
};

struct SearchSpace {
  std::vector<SearchParam> params;
};

struct TrialResult {
  int index = 0;
  std::map<std::string, std::string> assignment;
  double val_loss = 0.0;
};

struct SearchResult {
  TrialResult best;
  std::vector<TrialResult> trials;
};

/// Seeded uniform draws over the space; each trial trains under
/// budget_steps optimizer steps and is ranked by validation loss.
/// Recognized parameter names: lr_max, pct_warmup, clip_norm, q_low,
/// q_high, truncation_len, d_model, n_heads, d_ff, n_history, activation.
SearchResult random_search(
    const SearchSpace& space, int n_trials, long budget_steps,
    const std::vector<std::vector<TrajectoryRecord>>& trajectories,
    const ModelConfig& base_model, const TrainConfig& base_cfg,
    const NoiseParams& noise, std::uint64_t seed);

}  // namespace ikf
