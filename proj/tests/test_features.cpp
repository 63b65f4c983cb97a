// SPDX-License-Identifier: Apache-2.0

#include "inekformer/features.hpp"

#include "test_util.hpp"

#include <gtest/gtest.h>

using namespace ikf;
using ikf::test::Rng;

namespace {

FeatureFrame random_frame(Rng& rng) {
  FeatureFrame f;
  Eigen::Matrix<double, kScaledFeatureDim, 1> v;
  for (int i = 0; i < kScaledFeatureDim; ++i) v[i] = rng.uniform(-2.0, 2.0);
  f.set_scaled_dims(v);
  f.contact = Eigen::Vector2d(rng.uniform(0, 1), rng.uniform(0, 1));
  return f;
}

}  // namespace

TEST(ComputeFeatures, StationaryExactStateDegenerates) {
  Rng rng(1);
  FilterState x;
  x.x = rng.element(0.8, 0.5);
  const Vec3 h_l = rng.vec3(0.6), h_r = rng.vec3(0.6);
  // consistent contacts: innovation vanishes
  x.set_contact_left(x.rot() * h_l + x.pos());
  x.set_contact_right(x.rot() * h_r + x.pos());
  const auto y = std::make_pair(observation_vector(h_l, Foot::kLeft),
                                observation_vector(h_r, Foot::kRight));

  const FeatureFrame f = compute_features(x, x, x, y, y, {1, 0.5});
  EXPECT_LT(f.obs_diff.norm(), 1e-15);
  EXPECT_LT(f.innovation_pair.norm(), 1e-12);

  FeatureFrame::Vec21 identity_flat = FeatureFrame::Vec21::Zero();
  identity_flat[0] = identity_flat[8] = identity_flat[16] = 1.0;
  EXPECT_LT((f.evolution_diff - identity_flat).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_LT((f.update_diff - identity_flat).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_TRUE(f.contact.isApprox(Eigen::Vector2d(1, 0.5), 0.0));
}

TEST(ComputeFeatures, EqualPreviousStatesGiveIdentityEvolution) {
  Rng rng(2);
  FilterState prev;
  prev.x = rng.element();
  FilterState prop;
  prop.x = rng.element();
  const auto y_now = std::make_pair(observation_vector(rng.vec3(), Foot::kLeft),
                                    observation_vector(rng.vec3(), Foot::kRight));
  const FeatureFrame f =
      compute_features(prev, prev, prop, y_now, y_now, {1, 1});
  FeatureFrame::Vec21 identity_flat = FeatureFrame::Vec21::Zero();
  identity_flat[0] = identity_flat[8] = identity_flat[16] = 1.0;
  EXPECT_LT((f.evolution_diff - identity_flat).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(ComputeFeatures, DenseProductOracle) {
  Rng rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    FilterState prev, prev2, prop;
    prev.x = rng.element();
    prev2.x = rng.element();
    prop.x = rng.element();
    const auto y_now =
        std::make_pair(observation_vector(rng.vec3(), Foot::kLeft),
                       observation_vector(rng.vec3(), Foot::kRight));
    const auto y_prev =
        std::make_pair(observation_vector(rng.vec3(), Foot::kLeft),
                       observation_vector(rng.vec3(), Foot::kRight));
    const FeatureFrame f =
        compute_features(prev, prev2, prop, y_now, y_prev, {0.5, 0.5});

    const Mat7 evo = prev.x.dense() * prev2.x.dense().inverse();
    const Mat7 upd = prev.x.dense() * prop.x.dense().inverse();
    for (int r = 0; r < 3; ++r)
      for (int c = 0; c < 7; ++c) {
        EXPECT_NEAR(f.evolution_diff[r * 7 + c], evo(r, c), 1e-12);
        EXPECT_NEAR(f.update_diff[r * 7 + c], upd(r, c), 1e-12);
      }
  }
}

TEST(ComputeFeatures, RelativeTransformsIgnoreRightComposition) {
  // f3/f4 depend only on relative transforms: composing every state with a
  // fixed element on the right cancels mathematically; numerically it holds
  // to tight tolerance.
  Rng rng(4);
  const StateElement g = rng.element();
  FilterState prev, prev2, prop;
  prev.x = rng.element();
  prev2.x = rng.element();
  prop.x = rng.element();
  const auto y = std::make_pair(observation_vector(rng.vec3(), Foot::kLeft),
                                observation_vector(rng.vec3(), Foot::kRight));
  const FeatureFrame base =
      compute_features(prev, prev2, prop, y, y, {1, 1});

  FilterState prev_g = prev, prev2_g = prev2, prop_g = prop;
  prev_g.x = prev.x.compose(g);
  prev2_g.x = prev2.x.compose(g);
  prop_g.x = prop.x.compose(g);
  const FeatureFrame moved =
      compute_features(prev_g, prev2_g, prop_g, y, y, {1, 1});

  EXPECT_LT((base.evolution_diff - moved.evolution_diff).cwiseAbs().maxCoeff(),
            1e-9);
  EXPECT_LT((base.update_diff - moved.update_diff).cwiseAbs().maxCoeff(),
            1e-9);
}

TEST(FitScaler, HandComputedQuantiles) {
  std::vector<FeatureFrame> frames;
  for (double v : {1.0, 2.0, 3.0, 4.0, 5.0}) {
    FeatureFrame f;
    f.set_scaled_dims(Eigen::Matrix<double, kScaledFeatureDim, 1>::Constant(v));
    frames.push_back(f);
  }
  const ScalerParams p = fit_scaler(frames, 0.25, 0.75);
  EXPECT_NEAR(p.center[0], 3.0, 1e-15);
  EXPECT_NEAR(p.scale[0], 2.0, 1e-15);
}

TEST(FitScaler, ConstantDimensionGuard) {
  std::vector<FeatureFrame> frames(4);
  for (auto& f : frames)
    f.set_scaled_dims(
        Eigen::Matrix<double, kScaledFeatureDim, 1>::Constant(7.25));
  const ScalerParams p = fit_scaler(frames, 0.05, 0.95);
  EXPECT_NEAR(p.center[0], 7.25, 1e-15);
  EXPECT_DOUBLE_EQ(p.scale[0], 1.0);
}

TEST(FitScaler, RejectsBadInput) {
  EXPECT_THROW(fit_scaler({}, 0.05, 0.95), std::invalid_argument);
  std::vector<FeatureFrame> frames(3);
  EXPECT_THROW(fit_scaler(frames, 0.9, 0.1), std::invalid_argument);
}

TEST(ApplyScaler, CenterMapsToZeroAndContactsPassThrough) {
  Rng rng(5);
  std::vector<FeatureFrame> frames;
  for (int i = 0; i < 50; ++i) frames.push_back(random_frame(rng));
  const ScalerParams p = fit_scaler(frames, 0.05, 0.95);

  FeatureFrame centered;
  centered.set_scaled_dims(p.center);
  centered.contact = Eigen::Vector2d(0.3, 0.9);
  const FeatureFrame out = apply_scaler(centered, p);
  EXPECT_LT(out.scaled_dims().cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_TRUE(out.contact.isApprox(Eigen::Vector2d(0.3, 0.9), 0.0));
}

TEST(ApplyScaler, FitThenApplyNormalizes) {
  Rng rng(6);
  std::vector<FeatureFrame> frames;
  for (int i = 0; i < 101; ++i) frames.push_back(random_frame(rng));
  const ScalerParams p = fit_scaler(frames, 0.25, 0.75);

  std::vector<FeatureFrame> scaled;
  for (const auto& f : frames) scaled.push_back(apply_scaler(f, p));
  const ScalerParams refit = fit_scaler(scaled, 0.25, 0.75);
  EXPECT_LT(refit.center.cwiseAbs().maxCoeff(), 1e-9);
  EXPECT_LT((refit.scale - Eigen::Matrix<double, kScaledFeatureDim, 1>::Ones())
                .cwiseAbs()
                .maxCoeff(),
            1e-9);
}

TEST(FeatureHistory, WindowEmissionCount) {
  Rng rng(7);
  const int n_history = 10;
  const int stream_len = 37;
  FeatureHistory hist(n_history);
  int windows = 0;
  for (int i = 0; i < stream_len; ++i) {
    hist.push(random_frame(rng));
    if (hist.full()) {
      ++windows;
      EXPECT_EQ(hist.window().size(), static_cast<size_t>(n_history));
    }
  }
  EXPECT_EQ(windows, stream_len - n_history + 1);
}

TEST(FeatureHistory, WindowPreservesOrder) {
  FeatureHistory hist(3);
  for (int i = 0; i < 5; ++i) {
    FeatureFrame f;
    f.t = i;
    hist.push(f);
  }
  const auto window = hist.window();
  ASSERT_EQ(window.size(), 3u);
  EXPECT_DOUBLE_EQ(window[0].t, 2.0);
  EXPECT_DOUBLE_EQ(window[2].t, 4.0);
}
