// SPDX-License-Identifier: Apache-2.0

#include "inekformer/hybrid.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <stdexcept>

namespace ikf {

std::string to_string(FilterMode m) {
  return m == FilterMode::kAutoregressive ? "ar" : "1a";
}

FilterMode filter_mode_from_string(const std::string& name) {
  if (name == "ar") return FilterMode::kAutoregressive;
  if (name == "1a") return FilterMode::kOneStepAhead;
  throw std::invalid_argument("unknown filter mode: " + name);
}

HybridFilter::HybridFilter(const ModelParams* params,
                           const ScalerParams* scaler,
                           const NoiseParams& noise, const FilterState& x0,
                           const Covariance& p0)
    : params_(params),
      scaler_(scaler),
      noise_(noise),
      x_(x0),
      p_(p0),
      history_(params ? params->config.n_history : 1) {}

HybridStepResult HybridFilter::step(const TrajectoryRecord& record) {
  HybridStepResult res;
  res.mu = {contact_probability(record.fz_left),
            contact_probability(record.fz_right)};
  res.y_left = observation_vector(record.h_left, Foot::kLeft);
  res.y_right = observation_vector(record.h_right, Foot::kRight);

  const double dt = record.t - x_.t;
  FilterState prop = x_;
  if (dt != 0.0) {
    prop = propagate_state(x_, {record.gyro, record.accel, record.t}, dt);
    if (!model_engaged_) p_ = propagate_covariance(p_, x_, dt, noise_, res.mu);
  }
  res.propagated = prop;

  const auto t_start = std::chrono::steady_clock::now();

  if (params_ && started_) {
    const FeatureFrame frame =
        compute_features(prev_corr_, prev2_corr_, prop,
                         {res.y_left, res.y_right}, y_prev_, res.mu);
    last_raw_frame_ = frame;
    history_.push(scaler_ ? apply_scaler(frame, *scaler_) : frame);
  }

  if (params_ && history_.full()) {
    model_engaged_ = true;
    const auto window = history_.window();
    ForwardResult fwd = forward(window, *params_);
    res.used_model = true;
    res.raw_gain = fwd.gain;
    res.trace = std::move(fwd.trace);
    res.corrected = correct(prop, fwd.gain, res.y_left, res.y_right, res.mu);
  } else {
    const GainOutcome g = analytic_gain(p_, res.mu, noise_, prop, last_gain_);
    last_gain_ = g.gain;
    res.corrected = correct(prop, g.gain, res.y_left, res.y_right, res.mu);
    p_ = correct_covariance(p_, g.gain, res.mu, noise_, prop);
  }

  res.step_ms = std::chrono::duration<double, std::milli>(
                    std::chrono::steady_clock::now() - t_start)
                    .count();

  x_ = res.corrected;
  if (!started_) {
    prev_corr_ = res.corrected;
    prev2_corr_ = res.corrected;
    started_ = true;
  } else {
    prev2_corr_ = prev_corr_;
    prev_corr_ = res.corrected;
  }
  y_prev_ = {res.y_left, res.y_right};
  ++steps_taken_;
  return res;
}

void HybridFilter::reset_feedback(const FilterState& state) {
  x_ = state;
  prev_corr_ = state;
  if (steps_taken_ <= 1) prev2_corr_ = state;
}

namespace {

double percentile(std::vector<double> v, double q) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  const auto idx = static_cast<size_t>(q * static_cast<double>(v.size() - 1));
  return v[idx];
}

std::uint64_t hash_config(const Checkpoint* ckpt, FilterMode mode,
                          const NoiseParams& noise) {
  std::uint64_t h = fnv1a(to_string(mode).data(), to_string(mode).size());
  const double vals[] = {noise.gyro_var.x(), noise.accel_var.x(),
                         noise.contact_var, noise.swing_var,
                         noise.obs_var.x()};
  h = fnv1a(vals, sizeof(vals), h);
  if (ckpt) {
    const std::uint64_t mark[] = {parameter_count(ckpt->params),
                                  static_cast<std::uint64_t>(
                                      ckpt->params.config.n_history)};
    h = fnv1a(mark, sizeof(mark), h);
  }
  return h;
}

}  // namespace

HybridRunResult run_hybrid_filter(const std::vector<TrajectoryRecord>& records,
                                  const Checkpoint* ckpt, FilterMode mode,
                                  const NoiseParams& noise) {
  HybridRunResult out;
  out.report.mode = to_string(mode);
  out.report.config_hash = hash_config(ckpt, mode, noise);
  if (records.empty()) return out;

  HybridFilter filter(ckpt ? &ckpt->params : nullptr,
                      ckpt ? &ckpt->scaler : nullptr, noise,
                      ground_truth_state(records.front()),
                      default_initial_covariance());

  std::vector<Vec9> etas;
  std::vector<double> model_times, all_times;
  std::uint64_t checksum = fnv1a(nullptr, 0);
  for (const auto& record : records) {
    const HybridStepResult res = filter.step(record);
    out.estimates.push_back(res.corrected);
    etas.push_back(eta(res.corrected, ground_truth_state(record)));

    const Mat7 dense = res.propagated.x.dense();
    checksum = fnv1a(dense.data(), sizeof(double) * 49, checksum);

    all_times.push_back(res.step_ms);
    if (res.used_model) model_times.push_back(res.step_ms);

    if (mode == FilterMode::kOneStepAhead)
      filter.reset_feedback(ground_truth_state(record));
  }

  const auto& times = model_times.empty() ? all_times : model_times;
  out.report.rmse_per_dim = rmse(etas);
  out.report.timing_p50_ms = percentile(times, 0.5);
  out.report.timing_p95_ms = percentile(times, 0.95);
  out.report.timing_max_ms = percentile(times, 1.0);
  out.report.propagated_checksum = checksum;
  out.report.steps = records.size();
  return out;
}

CompareResult compare_filters(const std::vector<TrajectoryRecord>& records,
                              const Checkpoint& ckpt,
                              const NoiseParams& noise) {
  CompareResult out;
  out.inekf =
      run_hybrid_filter(records, nullptr, FilterMode::kOneStepAhead, noise);
  out.inekformer =
      run_hybrid_filter(records, &ckpt, FilterMode::kOneStepAhead, noise);
  return out;
}

std::string tracks_csv(const std::vector<TrajectoryRecord>& records,
                       const std::vector<FilterState>& inekf_estimates,
                       const std::vector<FilterState>& hybrid_estimates) {
  std::string csv = "t,gt_x,gt_y";
  if (!inekf_estimates.empty()) csv += ",inekf_x,inekf_y";
  if (!hybrid_estimates.empty()) csv += ",inekformer_x,inekformer_y";
  csv += '\n';

  char buf[64];
  for (size_t i = 0; i < records.size(); ++i) {
    std::snprintf(buf, sizeof(buf), "%.9g,%.9g,%.9g", records[i].t,
                  records[i].pos.x(), records[i].pos.y());
    csv += buf;
    if (!inekf_estimates.empty()) {
      std::snprintf(buf, sizeof(buf), ",%.9g,%.9g",
                    inekf_estimates[i].pos().x(), inekf_estimates[i].pos().y());
      csv += buf;
    }
    if (!hybrid_estimates.empty()) {
      std::snprintf(buf, sizeof(buf), ",%.9g,%.9g",
                    hybrid_estimates[i].pos().x(),
                    hybrid_estimates[i].pos().y());
      csv += buf;
    }
    csv += '\n';
  }
  return csv;
}

}  // namespace ikf
