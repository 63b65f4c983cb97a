// SPDX-License-Identifier: Apache-2.0

#include "inekformer/gainformer.hpp"

#include "inekformer/checkpoint.hpp"
#include "test_util.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>

using namespace ikf;
using ikf::test::Rng;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

FeatureFrame random_frame(Rng& rng) {
  FeatureFrame f;
  Eigen::Matrix<double, kScaledFeatureDim, 1> v;
  for (int i = 0; i < kScaledFeatureDim; ++i) v[i] = rng.uniform(-1.5, 1.5);
  f.set_scaled_dims(v);
  f.contact = Eigen::Vector2d(rng.uniform(0, 1), rng.uniform(0, 1));
  return f;
}

std::vector<FeatureFrame> random_window(Rng& rng, int n) {
  std::vector<FeatureFrame> w;
  for (int i = 0; i < n; ++i) w.push_back(random_frame(rng));
  return w;
}

ModelConfig tiny_config() {
  ModelConfig cfg;
  cfg.d_model = 8;
  cfg.n_heads = 2;
  cfg.n_encoder_layers = 1;
  cfg.n_decoder_layers = 1;
  cfg.d_ff = 12;
  cfg.n_history = 3;
  cfg.activation = Activation::kGelu;
  return cfg;
}

// ---------------------------------------------------------------------------
// Straight-line reimplementation of the forward pass with plain loops; kept
// deliberately independent of the library's matrix formulation.
// ---------------------------------------------------------------------------

MatrixXd ref_linear(const LinearLayer& l, const MatrixXd& x) {
  MatrixXd out(x.rows(), l.w.cols());
  for (Eigen::Index r = 0; r < x.rows(); ++r)
    for (Eigen::Index c = 0; c < l.w.cols(); ++c) {
      double acc = l.b[c];
      for (Eigen::Index k = 0; k < x.cols(); ++k) acc += x(r, k) * l.w(k, c);
      out(r, c) = acc;
    }
  return out;
}

MatrixXd ref_layer_norm(const LayerNormLayer& l, const MatrixXd& x) {
  MatrixXd out(x.rows(), x.cols());
  const auto n = static_cast<double>(x.cols());
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    double mean = 0;
    for (Eigen::Index c = 0; c < x.cols(); ++c) mean += x(r, c);
    mean /= n;
    double var = 0;
    for (Eigen::Index c = 0; c < x.cols(); ++c)
      var += (x(r, c) - mean) * (x(r, c) - mean);
    var /= n;
    const double inv = 1.0 / std::sqrt(var + 1e-5);
    for (Eigen::Index c = 0; c < x.cols(); ++c)
      out(r, c) = (x(r, c) - mean) * inv * l.gain[c] + l.bias[c];
  }
  return out;
}

MatrixXd ref_attention(const AttentionLayer& l, int n_heads,
                       const MatrixXd& q_in, const MatrixXd& kv_in,
                       bool causal) {
  const int d_model = static_cast<int>(l.query.w.cols());
  const int d_head = d_model / n_heads;
  const MatrixXd q = ref_linear(l.query, q_in);
  const MatrixXd k = ref_linear(l.key, kv_in);
  const MatrixXd v = ref_linear(l.value, kv_in);

  MatrixXd ctx(q.rows(), d_model);
  for (int h = 0; h < n_heads; ++h) {
    for (Eigen::Index i = 0; i < q.rows(); ++i) {
      const Eigen::Index limit = causal ? i + 1 : k.rows();
      std::vector<double> scores(static_cast<size_t>(limit));
      double max_score = -1e300;
      for (Eigen::Index j = 0; j < limit; ++j) {
        double s = 0;
        for (int d = 0; d < d_head; ++d)
          s += q(i, h * d_head + d) * k(j, h * d_head + d);
        s /= std::sqrt(static_cast<double>(d_head));
        scores[static_cast<size_t>(j)] = s;
        max_score = std::max(max_score, s);
      }
      double denom = 0;
      for (Eigen::Index j = 0; j < limit; ++j)
        denom += std::exp(scores[static_cast<size_t>(j)] - max_score);
      for (int d = 0; d < d_head; ++d) {
        double acc = 0;
        for (Eigen::Index j = 0; j < limit; ++j)
          acc += std::exp(scores[static_cast<size_t>(j)] - max_score) / denom *
                 v(j, h * d_head + d);
        ctx(i, h * d_head + d) = acc;
      }
    }
  }
  return ref_linear(l.output, ctx);
}

MatrixXd ref_activation(Activation a, const MatrixXd& x) {
  MatrixXd out = x;
  for (Eigen::Index i = 0; i < out.size(); ++i) {
    const double v = out.data()[i];
    switch (a) {
      case Activation::kGelu:
        out.data()[i] = 0.5 * v * (1.0 + std::erf(v / std::sqrt(2.0)));
        break;
      case Activation::kRelu: out.data()[i] = v > 0 ? v : 0; break;
      case Activation::kTanh: out.data()[i] = std::tanh(v); break;
    }
  }
  return out;
}

GainMatrix ref_forward(std::span<const FeatureFrame> window,
                       const ModelParams& p) {
  const ModelConfig& cfg = p.config;
  const auto t = static_cast<Eigen::Index>(window.size());

  MatrixXd enc_in(t, kObsFeatureDim), dec_in(t, kStateFeatureDim);
  for (Eigen::Index i = 0; i < t; ++i) {
    enc_in.row(i) = window[i].encoder_input().transpose();
    dec_in.row(i) = window[i].decoder_input().transpose();
  }

  MatrixXd pe = MatrixXd::Zero(t, cfg.d_model);
  if (cfg.use_positional_encoding) {
    for (Eigen::Index pos = 0; pos < t; ++pos)
      for (int i = 0; i < cfg.d_model / 2; ++i) {
        const double freq = std::pow(10000.0, -2.0 * i / cfg.d_model);
        pe(pos, 2 * i) = std::sin(pos * freq);
        pe(pos, 2 * i + 1) = std::cos(pos * freq);
      }
  }

  MatrixXd x = ref_linear(p.embed_obs, enc_in) + pe;
  for (const auto& blk : p.encoder) {
    x = x + ref_attention(blk.attn, cfg.n_heads, ref_layer_norm(blk.ln_attn, x),
                          ref_layer_norm(blk.ln_attn, x), false);
    const MatrixXd n2 = ref_layer_norm(blk.ln_ff, x);
    x = x + ref_linear(blk.ff_out,
                       ref_activation(cfg.activation, ref_linear(blk.ff_in, n2)));
  }
  const MatrixXd memory = ref_layer_norm(p.encoder_norm, x);

  MatrixXd y = ref_linear(p.embed_state, dec_in) + pe;
  for (const auto& blk : p.decoder) {
    const MatrixXd n1 = ref_layer_norm(blk.ln_self, y);
    y = y + ref_attention(blk.self_attn, cfg.n_heads, n1, n1, true);
    const MatrixXd n2 = ref_layer_norm(blk.ln_cross, y);
    y = y + ref_attention(blk.cross_attn, cfg.n_heads, n2, memory, false);
    const MatrixXd n3 = ref_layer_norm(blk.ln_ff, y);
    y = y + ref_linear(blk.ff_out,
                       ref_activation(cfg.activation, ref_linear(blk.ff_in, n3)));
  }
  const MatrixXd z = ref_layer_norm(p.decoder_norm, y);
  const MatrixXd out = ref_linear(p.head, z.row(t - 1));

  GainMatrix g;
  for (int r = 0; r < kGainRows; ++r)
    for (int c = 0; c < kGainCols; ++c) g.k(r, c) = out(0, r * kGainCols + c);
  return g;
}

}  // namespace

TEST(Attention, UniformWhenScoresEqual) {
  // identical keys: every score equal, so the output is the value mean
  MatrixXd q = MatrixXd::Random(4, 8);
  MatrixXd k = MatrixXd::Ones(5, 8);
  MatrixXd v = MatrixXd::Random(5, 8);
  const MatrixXd out = attention(q, k, v, false);
  const MatrixXd mean = v.colwise().mean();
  for (int i = 0; i < 4; ++i)
    EXPECT_LT((out.row(i) - mean).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Attention, SingleKeyValuePassesThrough) {
  MatrixXd q = MatrixXd::Random(3, 8);
  MatrixXd k = MatrixXd::Random(1, 8);
  MatrixXd v = MatrixXd::Random(1, 8);
  const MatrixXd out = attention(q, k, v, false);
  for (int i = 0; i < 3; ++i)
    EXPECT_LT((out.row(i) - v.row(0)).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(Attention, NaiveTwoLoopOracle) {
  Rng rng(1);
  MatrixXd q = MatrixXd::Random(4, 8), k = MatrixXd::Random(4, 8),
           v = MatrixXd::Random(4, 8);
  MatrixXd probs;
  const MatrixXd out = attention(q, k, v, false, &probs);

  const double scale = 1.0 / std::sqrt(8.0);
  for (int i = 0; i < 4; ++i) {
    double denom = 0;
    Eigen::VectorXd e(4);
    for (int j = 0; j < 4; ++j) {
      e[j] = std::exp(scale * q.row(i).dot(k.row(j)));
      denom += e[j];
    }
    for (int c = 0; c < 8; ++c) {
      double acc = 0;
      for (int j = 0; j < 4; ++j) acc += e[j] / denom * v(j, c);
      EXPECT_NEAR(out(i, c), acc, 1e-10);
    }
    EXPECT_NEAR(probs.row(i).sum(), 1.0, 1e-12);
  }
}

TEST(Attention, CausalMaskBlocksFuture) {
  MatrixXd q = MatrixXd::Random(4, 8), k = MatrixXd::Random(4, 8),
           v = MatrixXd::Random(4, 8);
  MatrixXd probs;
  attention(q, k, v, true, &probs);
  for (int i = 0; i < 4; ++i) {
    for (int j = i + 1; j < 4; ++j) EXPECT_EQ(probs(i, j), 0.0);
    EXPECT_NEAR(probs.row(i).sum(), 1.0, 1e-12);
  }
}

TEST(Forward, AllZeroParametersGiveZeroGain) {
  const ModelConfig cfg = tiny_config();
  const ModelParams zero = zeros_like(init_params(cfg, 1));
  Rng rng(2);
  const auto window = random_window(rng, cfg.n_history);
  const ForwardResult res = forward(window, zero);
  EXPECT_EQ(res.gain.k.cwiseAbs().maxCoeff(), 0.0);
}

TEST(Forward, RejectsWrongWindowLength) {
  const ModelParams params = init_params(tiny_config(), 1);
  Rng rng(3);
  const auto window = random_window(rng, 5);
  EXPECT_THROW(forward(window, params), std::invalid_argument);
}

TEST(Forward, MatchesStraightLineReimplementation) {
  for (const Activation act :
       {Activation::kGelu, Activation::kRelu, Activation::kTanh}) {
    ModelConfig cfg = tiny_config();
    cfg.activation = act;
    const ModelParams params = init_params(cfg, 42);
    Rng rng(4);
    const auto window = random_window(rng, cfg.n_history);
    const ForwardResult res = forward(window, params);
    const GainMatrix ref = ref_forward(window, params);
    EXPECT_LT((res.gain.k - ref.k).cwiseAbs().maxCoeff(), 1e-10);
  }
}

TEST(Forward, AttentionRowsSumToOne) {
  const ModelParams params = init_params(tiny_config(), 7);
  Rng rng(5);
  const auto window = random_window(rng, params.config.n_history);
  const ForwardResult res = forward(window, params);
  auto check = [](const std::vector<Eigen::MatrixXd>& probs) {
    for (const auto& p : probs)
      for (Eigen::Index i = 0; i < p.rows(); ++i)
        EXPECT_NEAR(p.row(i).sum(), 1.0, 1e-6);
  };
  for (const auto& blk : res.trace.enc_blocks) check(blk.attn.probs);
  for (const auto& blk : res.trace.dec_blocks) {
    check(blk.self_attn.probs);
    check(blk.cross_attn.probs);
  }
}

TEST(Forward, EncoderPermutationDiagnostics) {
  ModelConfig cfg = tiny_config();
  cfg.use_positional_encoding = false;
  const ModelParams params = init_params(cfg, 11);
  Rng rng(6);
  auto window = random_window(rng, cfg.n_history);

  const GainMatrix base = forward(window, params).gain;

  // permute only the encoder-side features (f1, f2)
  auto permuted = window;
  std::swap(permuted[0].obs_diff, permuted[2].obs_diff);
  std::swap(permuted[0].innovation_pair, permuted[2].innovation_pair);
  const GainMatrix no_pe = forward(permuted, params).gain;
  EXPECT_LT((base.k - no_pe.k).cwiseAbs().maxCoeff(), 1e-12);

  ModelConfig cfg_pe = cfg;
  cfg_pe.use_positional_encoding = true;
  const ModelParams params_pe = init_params(cfg_pe, 11);
  const GainMatrix pe_base = forward(window, params_pe).gain;
  const GainMatrix pe_perm = forward(permuted, params_pe).gain;
  EXPECT_GT((pe_base.k - pe_perm.k).cwiseAbs().maxCoeff(), 1e-8);
}

TEST(Forward, DeterministicAcrossRuns) {
  const ModelConfig cfg = tiny_config();
  const ModelParams a = init_params(cfg, 99);
  const ModelParams b = init_params(cfg, 99);
  Rng rng(7);
  const auto window = random_window(rng, cfg.n_history);
  const GainMatrix ga = forward(window, a).gain;
  const GainMatrix gb = forward(window, b).gain;
  EXPECT_EQ(memcmp(ga.k.data(), gb.k.data(), sizeof(double) * 90), 0);
}

TEST(MaskGain, IdentityAndZeroCases) {
  Rng rng(8);
  GainMatrix k;
  for (int r = 0; r < 15; ++r)
    for (int c = 0; c < 6; ++c) k.k(r, c) = rng.uniform(-1, 1);

  const GainMatrix full = mask_gain(k, {1, 1});
  EXPECT_TRUE(full.k.isApprox(k.k, 0.0));

  const GainMatrix left_off = mask_gain(k, {0, 1});
  EXPECT_EQ(left_off.left().cwiseAbs().maxCoeff(), 0.0);
  EXPECT_TRUE(left_off.right().isApprox(k.right(), 0.0));
}

TEST(MaskGain, PreMaskingThenCorrectIsBitIdenticalToFolding) {
  // mask_gain followed by correct() with unit weights must match folding mu
  // into the correction bit for bit, including the mu == 0 edge.
  Rng rng(20);
  for (int trial = 0; trial < 30; ++trial) {
    FilterState x;
    x.x = rng.element();
    GainMatrix k;
    for (int r = 0; r < 15; ++r)
      for (int c = 0; c < 6; ++c) k.k(r, c) = rng.uniform(-0.8, 0.8);
    const Vec7 y_l = observation_vector(rng.vec3(), Foot::kLeft);
    const Vec7 y_r = observation_vector(rng.vec3(), Foot::kRight);
    ContactState mu{rng.uniform(0, 1), rng.uniform(0, 1)};
    if (trial % 3 == 0) mu.mu_left = 0.0;
    if (trial % 5 == 0) mu.mu_right = 0.0;

    const FilterState folded = correct(x, k, y_l, y_r, mu);
    const FilterState premasked =
        correct(x, mask_gain(k, mu), y_l, y_r, {1.0, 1.0});
    EXPECT_EQ(memcmp(folded.x.cols.data(), premasked.x.cols.data(),
                     sizeof(double) * 12),
              0);
    EXPECT_EQ(memcmp(folded.x.rot.matrix().data(),
                     premasked.x.rot.matrix().data(), sizeof(double) * 9),
              0);
  }
}

TEST(ModelParams, RejectsIndivisibleHeadCount) {
  ModelConfig cfg = tiny_config();
  cfg.d_model = 10;
  cfg.n_heads = 4;
  EXPECT_THROW(init_params(cfg, 0), std::invalid_argument);
}

TEST(MaskGain, ElementwiseScaleOracle) {
  Rng rng(9);
  GainMatrix k;
  for (int r = 0; r < 15; ++r)
    for (int c = 0; c < 6; ++c) k.k(r, c) = rng.uniform(-1, 1);
  const GainMatrix masked = mask_gain(k, {0.5, 0.25});
  for (int r = 0; r < 15; ++r)
    for (int c = 0; c < 6; ++c)
      EXPECT_DOUBLE_EQ(masked.k(r, c), k.k(r, c) * (c < 3 ? 0.5 : 0.25));
}

TEST(Backward, ZeroUpstreamGradientGivesZero) {
  const ModelParams params = init_params(tiny_config(), 5);
  Rng rng(10);
  const auto window = random_window(rng, params.config.n_history);
  const ForwardResult res = forward(window, params);
  ModelParams grads = backward(params, res.trace,
                               Eigen::Matrix<double, 15, 6>::Zero());
  for (const auto& view : tensor_views(grads))
    for (Eigen::Index i = 0; i < view.size; ++i)
      EXPECT_EQ(view.data[i], 0.0);
}

TEST(Backward, HeadBiasGradientIsReshapedUpstream) {
  const ModelParams params = init_params(tiny_config(), 6);
  Rng rng(11);
  const auto window = random_window(rng, params.config.n_history);
  const ForwardResult res = forward(window, params);

  Eigen::Matrix<double, 15, 6> dgain;
  for (int r = 0; r < 15; ++r)
    for (int c = 0; c < 6; ++c) dgain(r, c) = rng.uniform(-1, 1);
  const ModelParams grads = backward(params, res.trace, dgain);
  for (int r = 0; r < 15; ++r)
    for (int c = 0; c < 6; ++c)
      EXPECT_DOUBLE_EQ(grads.head.b[r * 6 + c], dgain(r, c));
}

TEST(Backward, FiniteDifferenceGradCheckAllParameters) {
  for (const Activation act :
       {Activation::kGelu, Activation::kRelu, Activation::kTanh}) {
    ModelConfig cfg = tiny_config();
    cfg.activation = act;
    ModelParams params = init_params(cfg, 17);
    Rng rng(12);
    const auto window = random_window(rng, cfg.n_history);

    Eigen::Matrix<double, 15, 6> dgain;
    for (int r = 0; r < 15; ++r)
      for (int c = 0; c < 6; ++c) dgain(r, c) = rng.uniform(-1, 1);

    // scalar objective: sum(dgain .* gain)
    auto objective = [&]() {
      const GainMatrix g = forward(window, params).gain;
      return (dgain.array() * g.k.array()).sum();
    };

    const ForwardResult res = forward(window, params);
    ModelParams grads = backward(params, res.trace, dgain);

    const double eps = 1e-5;
    auto p_views = tensor_views(params);
    auto g_views = tensor_views(grads);
    int checked = 0;
    for (size_t vi = 0; vi < p_views.size(); ++vi) {
      for (Eigen::Index i = 0; i < p_views[vi].size; ++i) {
        double& w = p_views[vi].data[i];
        const double orig = w;
        w = orig + eps;
        const double up = objective();
        w = orig - eps;
        const double down = objective();
        w = orig;
        const double fd = (up - down) / (2 * eps);
        const double analytic = g_views[vi].data[i];
        const double denom = std::max({std::abs(fd), std::abs(analytic), 1e-5});
        EXPECT_LT(std::abs(fd - analytic) / denom, 1e-4)
            << "tensor " << vi << " index " << i << " act "
            << to_string(act);
        ++checked;
      }
    }
    EXPECT_EQ(checked, static_cast<int>(parameter_count(params)));
  }
}

TEST(ModelParams, ParameterCountInPaperRange) {
  const ModelParams params = init_params(ModelConfig{}, 0);
  const std::size_t count = parameter_count(params);
  EXPECT_GE(count, 10000u);
  EXPECT_LE(count, 1000000u);
}

TEST(Checkpoint, RoundTripIsBitExact) {
  const ModelConfig cfg = tiny_config();
  Checkpoint ckpt;
  ckpt.params = init_params(cfg, 123);
  Rng rng(13);
  for (int i = 0; i < kScaledFeatureDim; ++i) {
    ckpt.scaler.center[i] = rng.uniform(-1, 1);
    ckpt.scaler.scale[i] = rng.uniform(0.1, 2.0);
  }
  ckpt.scaler.q_low = 0.07;
  ckpt.scaler.q_high = 0.93;

  const auto path = std::filesystem::temp_directory_path() / "ikf_test.ckpt";
  save_checkpoint(ckpt, path);
  const Checkpoint loaded = load_checkpoint(path);
  std::filesystem::remove(path);

  EXPECT_EQ(memcmp(loaded.scaler.center.data(), ckpt.scaler.center.data(),
                   sizeof(double) * kScaledFeatureDim),
            0);
  EXPECT_EQ(loaded.scaler.q_low, ckpt.scaler.q_low);

  auto a = tensor_views(const_cast<ModelParams&>(ckpt.params));
  auto b = tensor_views(const_cast<ModelParams&>(loaded.params));
  ASSERT_EQ(a.size(), b.size());
  for (size_t i = 0; i < a.size(); ++i) {
    ASSERT_EQ(a[i].size, b[i].size);
    EXPECT_EQ(memcmp(a[i].data, b[i].data,
                     sizeof(double) * static_cast<size_t>(a[i].size)),
              0);
  }
  EXPECT_EQ(loaded.params.config.n_history, cfg.n_history);
  EXPECT_EQ(to_string(loaded.params.config.activation),
            to_string(cfg.activation));
}

TEST(Checkpoint, RejectsCorruptedFile) {
  const auto path = std::filesystem::temp_directory_path() / "ikf_bad.ckpt";
  {
    std::ofstream os(path, std::ios::binary);
    os << "not a checkpoint";
  }
  EXPECT_THROW(load_checkpoint(path), std::runtime_error);
  std::filesystem::remove(path);
}
