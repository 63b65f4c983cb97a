// SPDX-License-Identifier: Apache-2.0

#include "inekformer/training.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace ikf {

TrainMode train_mode_from_string(const std::string& name) {
  if (name == "tf") return TrainMode::kTeacherForcing;
  if (name == "ar") return TrainMode::kAutoregressive;
  if (name == "ss") return TrainMode::kScheduled;
  throw std::invalid_argument("unknown train mode: " + name);
}

std::string to_string(TrainMode m) {
  switch (m) {
    case TrainMode::kTeacherForcing: return "tf";
    case TrainMode::kAutoregressive: return "ar";
    case TrainMode::kScheduled: return "ss";
  }
  return "tf";
}

namespace {

Eigen::Matrix<double, 3, 7> top_block(const FilterState& x) {
  return x.x.dense().topRows<3>();
}

// d(loss)/d(correction twist) at xi: the loss is |exp(xi) X - X_gt|_F^2,
// differentiated through the exponential with the left Jacobian.
Twist15 loss_twist_gradient(const Twist15& xi, const FilterState& x_prop,
                            const FilterState& x_gt) {
  const StateElement corrected = StateElement::exp(xi).compose(x_prop.x);
  const Mat7 err = corrected.dense() - x_gt.x.dense();
  const Mat7 b = err * corrected.dense().transpose();

  Twist15 g;
  g[0] = b(2, 1) - b(1, 2);
  g[1] = b(0, 2) - b(2, 0);
  g[2] = b(1, 0) - b(0, 1);
  for (int k = 0; k < kNumStateColumns; ++k)
    g.segment<3>(3 + 3 * k) = b.block<3, 1>(0, 3 + k);

  return 2.0 * sek3_left_jacobian<kNumStateColumns>(xi).transpose() * g;
}

double loss_at_twist(const Twist15& xi, const FilterState& x_prop,
                     const FilterState& x_gt) {
  const StateElement corrected = StateElement::exp(xi).compose(x_prop.x);
  return (corrected.dense().topRows<3>() - x_gt.x.dense().topRows<3>())
      .squaredNorm();
}

Twist15 loss_twist_gradient_fd(const Twist15& xi, const FilterState& x_prop,
                               const FilterState& x_gt) {
  constexpr double kEps = 1e-7;
  const double base = loss_at_twist(xi, x_prop, x_gt);
  Twist15 g;
  for (int i = 0; i < 15; ++i) {
    Twist15 bumped = xi;
    bumped[i] += kEps;
    g[i] = (loss_at_twist(bumped, x_prop, x_gt) - base) / kEps;
  }
  return g;
}

}  // namespace

double loss(const GainMatrix& k, const FilterState& x_prop, const Vec7& y_left,
            const Vec7& y_right, const ContactState& mu,
            const FilterState& x_gt) {
  const FilterState corrected = correct(x_prop, k, y_left, y_right, mu);
  return (top_block(corrected) - top_block(x_gt)).squaredNorm();
}

Eigen::Matrix<double, kGainRows, kGainCols> loss_gradient(
    const GainMatrix& k, const FilterState& x_prop, const Vec7& y_left,
    const Vec7& y_right, const ContactState& mu, const FilterState& x_gt,
    bool finite_difference) {
  const Twist15 xi = correction_twist(x_prop, k, y_left, y_right, mu);
  const Twist15 dxi = finite_difference
                          ? loss_twist_gradient_fd(xi, x_prop, x_gt)
                          : loss_twist_gradient(xi, x_prop, x_gt);

  Eigen::Matrix<double, kGainRows, kGainCols> dk =
      Eigen::Matrix<double, kGainRows, kGainCols>::Zero();
  if (mu.mu_left != 0.0)
    dk.block<15, 3>(0, 0) =
        mu.mu_left * dxi * innovation(x_prop, y_left).transpose();
  if (mu.mu_right != 0.0)
    dk.block<15, 3>(0, 3) =
        mu.mu_right * dxi * innovation(x_prop, y_right).transpose();
  return dk;
}

double ss_probability(int epoch, const SsSchedule& ss) {
  const double arg = std::clamp(
      ss.steepness * (static_cast<double>(epoch) - ss.midpoint), -500.0,
      500.0);
  return 1.0 / (1.0 + std::exp(arg));
}

double onecycle_lr(long step, const TrainConfig& cfg) {
  constexpr double kDiv = 25.0;
  constexpr double kFinalDiv = 1e4;
  if (step < 0 || step > cfg.total_steps)
    throw std::invalid_argument("onecycle_lr: step out of range");

  const auto total = static_cast<double>(cfg.total_steps);
  const double warmup = std::max(1.0, std::round(cfg.pct_warmup * total));
  const double lr_start = cfg.lr_max / kDiv;
  const double lr_final = cfg.lr_max / (kDiv * kFinalDiv);

  auto cosine = [](double from, double to, double pct) {
    if (pct <= 0.0) return from;
    if (pct >= 1.0) return to;
    return to + (from - to) * 0.5 * (1.0 + std::cos(std::numbers::pi * pct));
  };
  if (static_cast<double>(step) <= warmup)
    return cosine(lr_start, cfg.lr_max, static_cast<double>(step) / warmup);
  const double pct =
      (static_cast<double>(step) - warmup) / std::max(1.0, total - warmup);
  return cosine(cfg.lr_max, lr_final, pct);
}

OptimizerState make_optimizer_state(const ModelParams& params) {
  OptimizerState state;
  auto views = tensor_views(const_cast<ModelParams&>(params));
  for (const auto& view : views) {
    state.m.emplace_back(Eigen::VectorXd::Zero(view.size));
    state.v.emplace_back(Eigen::VectorXd::Zero(view.size));
  }
  return state;
}

void adam_step(ModelParams& params, ModelParams& grads, OptimizerState& state,
               double lr, const AdamParams& adam) {
  auto p_views = tensor_views(params);
  auto g_views = tensor_views(grads);
  if (p_views.size() != state.m.size())
    throw std::invalid_argument("adam_step: optimizer state shape mismatch");

  state.step += 1;
  const auto t = static_cast<double>(state.step);
  const double bc1 = 1.0 - std::pow(adam.beta1, t);
  const double bc2 = 1.0 - std::pow(adam.beta2, t);

  for (size_t i = 0; i < p_views.size(); ++i) {
    Eigen::Map<Eigen::VectorXd> p(p_views[i].data, p_views[i].size);
    Eigen::Map<const Eigen::VectorXd> g(g_views[i].data, g_views[i].size);
    auto& m = state.m[i];
    auto& v = state.v[i];
    m = adam.beta1 * m + (1.0 - adam.beta1) * g;
    v = adam.beta2 * v.array().matrix() +
        (1.0 - adam.beta2) * g.cwiseProduct(g);
    p.array() -= lr * (m.array() / bc1) /
                 ((v.array() / bc2).sqrt() + adam.eps);
  }
}

double clip_gradients(ModelParams& grads, double max_norm) {
  double sq = 0.0;
  auto views = tensor_views(grads);
  for (const auto& view : views) {
    Eigen::Map<const Eigen::VectorXd> g(view.data, view.size);
    sq += g.squaredNorm();
  }
  const double norm = std::sqrt(sq);
  if (max_norm > 0.0 && norm > max_norm) {
    const double scale = max_norm / norm;
    for (const auto& view : views) {
      Eigen::Map<Eigen::VectorXd> g(view.data, view.size);
      g *= scale;
    }
  }
  return norm;
}

namespace {

void accumulate(ModelParams& into, const ModelParams& grads) {
  auto dst = tensor_views(into);
  auto src = tensor_views(const_cast<ModelParams&>(grads));
  for (size_t i = 0; i < dst.size(); ++i) {
    Eigen::Map<Eigen::VectorXd> d(dst[i].data, dst[i].size);
    Eigen::Map<const Eigen::VectorXd> s(src[i].data, src[i].size);
    d += s;
  }
}

void scale_params(ModelParams& grads, double factor) {
  for (const auto& view : tensor_views(grads)) {
    Eigen::Map<Eigen::VectorXd> g(view.data, view.size);
    g *= factor;
  }
}

}  // namespace

namespace {

struct WindowGradient {
  double loss_sum = 0.0;
  int model_steps = 0;
};

// Rolls one TBPTT window and accumulates d(loss)/d(params) into grad_acc
// (summed over the model-corrected steps, not yet averaged).
WindowGradient tbptt_window_gradient(
    const std::vector<TrajectoryRecord>& segment, const ModelParams& params,
    const TrainConfig& cfg, const ScalerParams& scaler,
    const NoiseParams& noise, double feed_gt_probability,
    std::mt19937_64& rng, ModelParams& grad_acc) {
  const int n_history = params.config.n_history;
  if (static_cast<int>(segment.size()) < n_history + cfg.truncation_len)
    throw std::invalid_argument("tbptt_ss_step: segment too short");

  HybridFilter filter(&params, &scaler, noise,
                      ground_truth_state(segment.front()),
                      default_initial_covariance());
  std::uniform_real_distribution<double> uniform(0.0, 1.0);

  WindowGradient out;
  for (const auto& record : segment) {
    const HybridStepResult res = filter.step(record);
    const FilterState gt = ground_truth_state(record);

    if (res.used_model) {
      out.loss_sum += loss(res.raw_gain, res.propagated, res.y_left,
                           res.y_right, res.mu, gt);
      const auto dgain = loss_gradient(res.raw_gain, res.propagated,
                                       res.y_left, res.y_right, res.mu, gt);
      accumulate(grad_acc, backward(params, res.trace, dgain));
      ++out.model_steps;
    }

    if (out.model_steps >= cfg.truncation_len) break;
    if (uniform(rng) < feed_gt_probability) filter.reset_feedback(gt);
  }
  if (out.model_steps == 0)
    throw std::runtime_error("tbptt_ss_step: window never filled");
  return out;
}

double feed_gt_probability_for(const TrainConfig& cfg, int epoch) {
  switch (cfg.mode) {
    case TrainMode::kTeacherForcing: return 1.0;
    case TrainMode::kAutoregressive: return 0.0;
    case TrainMode::kScheduled: return ss_probability(epoch, cfg.ss);
  }
  return 1.0;
}

}  // namespace

TbpttMetrics tbptt_ss_step(const std::vector<TrajectoryRecord>& segment,
                           ModelParams& params, OptimizerState& opt_state,
                           const TrainConfig& cfg, const ScalerParams& scaler,
                           const NoiseParams& noise, int epoch,
                           std::mt19937_64& rng) {
  TbpttMetrics metrics;
  metrics.feed_gt_probability = feed_gt_probability_for(cfg, epoch);

  ModelParams grad_acc = zeros_like(params);
  const WindowGradient wg =
      tbptt_window_gradient(segment, params, cfg, scaler, noise,
                            metrics.feed_gt_probability, rng, grad_acc);
  metrics.model_steps = wg.model_steps;

  scale_params(grad_acc, 1.0 / wg.model_steps);
  metrics.window_loss = wg.loss_sum / wg.model_steps;
  metrics.grad_norm = clip_gradients(grad_acc, cfg.clip_norm);
  metrics.lr = onecycle_lr(std::min(opt_state.step + 1, cfg.total_steps), cfg);
  adam_step(params, grad_acc, opt_state, metrics.lr, cfg.adam);
  return metrics;
}

double evaluate_one_step_loss(const std::vector<TrajectoryRecord>& records,
                              const ModelParams& params,
                              const ScalerParams& scaler,
                              const NoiseParams& noise) {
  if (records.empty()) return 0.0;
  HybridFilter filter(&params, &scaler, noise,
                      ground_truth_state(records.front()),
                      default_initial_covariance());
  double sum = 0.0;
  int n = 0;
  for (const auto& record : records) {
    const HybridStepResult res = filter.step(record);
    const FilterState gt = ground_truth_state(record);
    if (res.used_model) {
      sum += loss(res.raw_gain, res.propagated, res.y_left, res.y_right,
                  res.mu, gt);
      ++n;
    }
    filter.reset_feedback(gt);
  }
  return n > 0 ? sum / n : 0.0;
}

namespace {

// Unscaled feature frames of a fully teacher-forced rollout: every state
// entering the feature computation comes from ground truth, matching what
// the filter sees in teacher-forcing / one-step-ahead operation.
std::vector<FeatureFrame> collect_features(
    const std::vector<TrajectoryRecord>& records) {
  std::vector<FeatureFrame> frames;
  if (records.size() < 2) return frames;

  FilterState prev = ground_truth_state(records.front());
  FilterState prev2 = prev;
  std::pair<Vec7, Vec7> y_prev{
      observation_vector(records.front().h_left, Foot::kLeft),
      observation_vector(records.front().h_right, Foot::kRight)};

  for (size_t i = 1; i < records.size(); ++i) {
    const TrajectoryRecord& r = records[i];
    const FilterState prop = propagate_state(
        prev, {r.gyro, r.accel, r.t}, r.t - prev.t);
    const std::pair<Vec7, Vec7> y_now{
        observation_vector(r.h_left, Foot::kLeft),
        observation_vector(r.h_right, Foot::kRight)};
    const ContactState mu{contact_probability(r.fz_left),
                          contact_probability(r.fz_right)};
    frames.push_back(compute_features(prev, prev2, prop, y_now, y_prev, mu));

    prev2 = prev;
    prev = ground_truth_state(r);
    y_prev = y_now;
  }
  return frames;
}

}  // namespace

TrainResult train_model(
    const std::vector<std::vector<TrajectoryRecord>>& trajectories,
    const ModelConfig& model_cfg, const TrainConfig& cfg,
    const NoiseParams& noise, const EpochCallback& on_epoch) {
  if (trajectories.empty())
    throw std::invalid_argument("train_model: no trajectories");

  // Train / validation split: the last val_fraction of each trajectory.
  std::vector<std::vector<TrajectoryRecord>> train_parts, val_parts;
  for (const auto& records : trajectories) {
    const auto split = static_cast<size_t>(
        std::llround((1.0 - cfg.val_fraction) * records.size()));
    train_parts.emplace_back(records.begin(),
                             records.begin() + static_cast<long>(split));
    val_parts.emplace_back(records.begin() + static_cast<long>(split),
                           records.end());
  }

  // Robust scaler fitted once over teacher-forced training features.
  std::vector<FeatureFrame> all_frames;
  for (const auto& part : train_parts) {
    if (part.empty()) continue;
    const auto frames = collect_features(part);
    all_frames.insert(all_frames.end(), frames.begin(), frames.end());
  }
  if (all_frames.empty())
    throw std::invalid_argument("train_model: training split too short");
  const ScalerParams scaler = fit_scaler(all_frames, cfg.q_low, cfg.q_high);

  // Segment table: (trajectory index, start offset).
  const int seg_len = model_cfg.n_history + cfg.truncation_len;
  const int stride =
      cfg.segment_stride > 0 ? cfg.segment_stride : cfg.truncation_len;
  std::vector<std::pair<size_t, size_t>> segments;
  for (size_t ti = 0; ti < train_parts.size(); ++ti) {
    const auto& part = train_parts[ti];
    if (static_cast<int>(part.size()) < seg_len) continue;
    for (size_t start = 0; start + seg_len <= part.size();
         start += static_cast<size_t>(stride))
      segments.emplace_back(ti, start);
  }
  if (segments.empty())
    throw std::invalid_argument("train_model: no full training segment");

  TrainConfig run_cfg = cfg;
  const long steps_per_epoch = std::max<long>(
      1, static_cast<long>(segments.size()) /
             std::max(1, cfg.batch_segments));
  if (run_cfg.total_steps <= 0)
    run_cfg.total_steps = steps_per_epoch * cfg.epochs;

  TrainResult result;
  result.scaler = scaler;
  result.params = init_params(model_cfg, cfg.seed);

  // Zero-gain baseline loss over the training windows (reference value for
  // relative-loss criteria).
  {
    double base = 0.0;
    int count = 0;
    const ModelParams zero = zeros_like(result.params);
    for (const auto& [ti, start] : segments) {
      const std::vector<TrajectoryRecord> segment(
          train_parts[ti].begin() + static_cast<long>(start),
          train_parts[ti].begin() + static_cast<long>(start + seg_len));
      HybridFilter filter(&zero, &scaler, noise,
                          ground_truth_state(segment.front()),
                          default_initial_covariance());
      for (const auto& record : segment) {
        const auto res = filter.step(record);
        if (res.used_model) {
          base += loss(res.raw_gain, res.propagated, res.y_left, res.y_right,
                       res.mu, ground_truth_state(record));
          ++count;
        }
        if (cfg.mode != TrainMode::kAutoregressive)
          filter.reset_feedback(ground_truth_state(record));
      }
    }
    result.initial_loss = count > 0 ? base / count : 0.0;
  }

  OptimizerState opt_state = make_optimizer_state(result.params);
  std::mt19937_64 rng(cfg.seed ^ 0x5deece66dULL);
  std::vector<size_t> order(segments.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = i;

  double val_loss = 0.0;
  bool done = false;
  const int batch = std::max(1, cfg.batch_segments);
  for (int epoch = 0; epoch < cfg.epochs && !done; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double epoch_loss = 0.0;
    long epoch_batches = 0;
    for (size_t base = 0; base < order.size() && !done;
         base += static_cast<size_t>(batch)) {
      // one optimizer step per batch of TBPTT windows
      ModelParams grad_acc = zeros_like(result.params);
      const double feed_gt = feed_gt_probability_for(run_cfg, epoch);
      double batch_loss = 0.0;
      int batch_steps = 0;
      const size_t end = std::min(order.size(),
                                  base + static_cast<size_t>(batch));
      for (size_t bi = base; bi < end; ++bi) {
        const auto [ti, start] = segments[order[bi]];
        const std::vector<TrajectoryRecord> segment(
            train_parts[ti].begin() + static_cast<long>(start),
            train_parts[ti].begin() + static_cast<long>(start + seg_len));
        const WindowGradient wg =
            tbptt_window_gradient(segment, result.params, run_cfg, scaler,
                                  noise, feed_gt, rng, grad_acc);
        batch_loss += wg.loss_sum;
        batch_steps += wg.model_steps;
      }
      scale_params(grad_acc, 1.0 / batch_steps);
      clip_gradients(grad_acc, run_cfg.clip_norm);
      const double lr = onecycle_lr(
          std::min(opt_state.step + 1, run_cfg.total_steps), run_cfg);
      adam_step(result.params, grad_acc, opt_state, lr, run_cfg.adam);

      const double mean_loss = batch_loss / batch_steps;
      epoch_loss += mean_loss;
      ++epoch_batches;
      result.log.push_back(
          {opt_state.step, epoch, lr, feed_gt, mean_loss, val_loss});
      if (opt_state.step >= run_cfg.total_steps) done = true;
    }
    result.final_train_loss = epoch_loss / std::max<long>(1, epoch_batches);

    double vsum = 0.0;
    int vcount = 0;
    for (const auto& part : val_parts) {
      if (static_cast<int>(part.size()) <= model_cfg.n_history) continue;
      vsum += evaluate_one_step_loss(part, result.params, scaler, noise);
      ++vcount;
    }
    val_loss = vcount > 0 ? vsum / vcount : result.final_train_loss;
    if (!result.log.empty()) result.log.back().val_loss = val_loss;
    if (on_epoch) on_epoch(epoch, result.params, result.scaler);
  }
  result.final_val_loss = val_loss;
  return result;
}

SearchResult random_search(
    const SearchSpace& space, int n_trials, long budget_steps,
    const std::vector<std::vector<TrajectoryRecord>>& trajectories,
    const ModelConfig& base_model, const TrainConfig& base_cfg,
    const NoiseParams& noise, std::uint64_t seed) {
  if (n_trials < 1)
    throw std::invalid_argument("random_search: need at least one trial");

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> uniform(0.0, 1.0);

  SearchResult result;
  for (int trial = 0; trial < n_trials; ++trial) {
    ModelConfig model = base_model;
    TrainConfig cfg = base_cfg;
    cfg.total_steps = budget_steps;
    cfg.epochs = std::max(cfg.epochs, static_cast<int>(budget_steps));
    cfg.seed = seed + static_cast<std::uint64_t>(trial);

    TrialResult tr;
    tr.index = trial;
    for (const auto& p : space.params) {
      double value = 0.0;
      std::string text;
      switch (p.kind) {
        case SearchParam::Kind::kLog:
          value = std::exp(std::log(p.min) +
                           uniform(rng) * (std::log(p.max) - std::log(p.min)));
          text = std::to_string(value);
          break;
        case SearchParam::Kind::kLinear:
          value = p.min + uniform(rng) * (p.max - p.min);
          text = std::to_string(value);
          break;
        case SearchParam::Kind::kInt:
          value = std::floor(p.min + uniform(rng) * (p.max - p.min + 1.0));
          value = std::min(value, p.max);
          text = std::to_string(static_cast<long>(value));
          break;
        case SearchParam::Kind::kChoice: {
          const auto idx = static_cast<size_t>(
              uniform(rng) * static_cast<double>(p.choices.size()));
          text = p.choices[std::min(idx, p.choices.size() - 1)];
          try {
            value = std::stod(text);  // numeric choices apply by value
          } catch (const std::exception&) {
          }
          break;
        }
      }
      tr.assignment[p.name] = text;

      if (p.name == "lr_max") cfg.lr_max = value;
      else if (p.name == "pct_warmup") cfg.pct_warmup = value;
      else if (p.name == "clip_norm") cfg.clip_norm = value;
      else if (p.name == "q_low") cfg.q_low = value;
      else if (p.name == "q_high") cfg.q_high = value;
      else if (p.name == "truncation_len")
        cfg.truncation_len = static_cast<int>(value);
      else if (p.name == "d_model") model.d_model = static_cast<int>(value);
      else if (p.name == "n_heads") model.n_heads = static_cast<int>(value);
      else if (p.name == "d_ff") model.d_ff = static_cast<int>(value);
      else if (p.name == "n_history")
        model.n_history = static_cast<int>(value);
      else if (p.name == "activation")
        model.activation = activation_from_string(text);
      else
        throw std::invalid_argument("random_search: unknown parameter " +
                                    p.name);
    }

    const TrainResult trained = train_model(trajectories, model, cfg, noise);
    tr.val_loss = trained.final_val_loss;
    result.trials.push_back(tr);
  }

  result.best = *std::min_element(
      result.trials.begin(), result.trials.end(),
      [](const TrialResult& a, const TrialResult& b) {
        return a.val_loss < b.val_loss;
      });
  return result;
}

}  // namespace ikf
