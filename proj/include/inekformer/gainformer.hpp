// SPDX-License-Identifier: Apache-2.0
//
// Transformer gain estimator: a learned embedding of the observation
// features feeds an encoder (latent observation-noise representation), a
// second embedding of the state features feeds a decoder with causal
// self-attention and cross-attention over the encoder output (latent
// estimation-uncertainty representation), and an affine head maps the last
// decoder position to the 15x6 gain. Pre-layer normalization throughout,
// sinusoidal positional encodings, exact reverse-mode gradients for every
// parameter.

#pragma once

#include "inekformer/features.hpp"
#include "inekformer/inekf.hpp"

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace ikf {

enum class Activation { kGelu, kRelu, kTanh };

std::string to_string(Activation a);
Activation activation_from_string(const std::string& name);

struct ModelConfig {
  int d_model = 32;
  int n_heads = 4;
  int n_encoder_layers = 2;
  int n_decoder_layers = 2;
  int d_ff = 64;
  int n_history = 10;
  Activation activation = Activation::kGelu;
  bool use_positional_encoding = true;
};

inline constexpr int kGainRows = 15;
inline constexpr int kGainCols = 6;
inline constexpr int kGainDim = kGainRows * kGainCols;

/// y = x * w + b with x rows as timesteps; w is (in x out).
struct LinearLayer {
  Eigen::MatrixXd w;
  Eigen::VectorXd b;
};

struct LayerNormLayer {
  Eigen::VectorXd gain;
  Eigen::VectorXd bias;
};

struct AttentionLayer {
  LinearLayer query, key, value, output;
};

struct EncoderBlock {
  LayerNormLayer ln_attn;
  AttentionLayer attn;
  LayerNormLayer ln_ff;
  LinearLayer ff_in, ff_out;
};

struct DecoderBlock {
  LayerNormLayer ln_self;
  AttentionLayer self_attn;
  LayerNormLayer ln_cross;
  AttentionLayer cross_attn;
  LayerNormLayer ln_ff;
  LinearLayer ff_in, ff_out;
};

/// All trainable tensors. Doubles as the gradient container: gradients are
/// a zero-initialized ModelParams of the same shape.
struct ModelParams {
  ModelConfig config;
  LinearLayer embed_obs;    // 12 -> d_model
  LinearLayer embed_state;  // 42 -> d_model
  std::vector<EncoderBlock> encoder;
  LayerNormLayer encoder_norm;
  std::vector<DecoderBlock> decoder;
  LayerNormLayer decoder_norm;
  LinearLayer head;  // d_model -> 90, reshaped row-major to 15x6
};

/// Seeded Xavier-normal init; layer-norm gains 1, biases 0; head weights
/// scaled down so the initial gain stays near zero.
ModelParams init_params(const ModelConfig& config, std::uint64_t seed);

/// Same shapes as init_params, all tensors zero.
ModelParams zeros_like(const ModelParams& params);

std::size_t parameter_count(const ModelParams& params);

/// Flat view over every tensor in declared order; anchors the checkpoint
/// layout and the optimizer state.
struct TensorView {
  double* data;
  Eigen::Index size;
};
std::vector<TensorView> tensor_views(ModelParams& params);
std::vector<TensorView> tensor_views(const ModelParams& params) = delete;

// --- forward / backward caches -------------------------------------------

struct LinearCache {
  Eigen::MatrixXd input;
};

struct LayerNormCache {
  Eigen::MatrixXd normalized;
  Eigen::VectorXd inv_std;
};

struct AttentionCache {
  Eigen::MatrixXd q, k, v;
  std::vector<Eigen::MatrixXd> probs;  // per head, rows sum to 1
  Eigen::MatrixXd context;
  LinearCache query_in, kv_in;
};

struct FfnCache {
  LinearCache input;
  Eigen::MatrixXd pre_act;
  LinearCache activated;
};

struct EncoderBlockCache {
  LayerNormCache ln_attn;
  AttentionCache attn;
  LayerNormCache ln_ff;
  FfnCache ffn;
};

struct DecoderBlockCache {
  LayerNormCache ln_self;
  AttentionCache self_attn;
  LayerNormCache ln_cross;
  AttentionCache cross_attn;
  LayerNormCache ln_ff;
  FfnCache ffn;
};

struct ForwardTrace {
  LinearCache embed_obs, embed_state;
  std::vector<EncoderBlockCache> enc_blocks;
  LayerNormCache encoder_norm;
  Eigen::MatrixXd memory;  // encoder output Z_N
  std::vector<DecoderBlockCache> dec_blocks;
  LayerNormCache decoder_norm;
  LinearCache head;
};

struct ForwardResult {
  GainMatrix gain;  // raw, pre contact masking
  ForwardTrace trace;
};

/// Scaled dot-product attention on explicit matrices (one head).
/// Rows of the softmax are max-subtracted; with causal set, column j > i is
/// masked out of row i.
Eigen::MatrixXd attention(const Eigen::MatrixXd& q, const Eigen::MatrixXd& k,
                          const Eigen::MatrixXd& v, bool causal,
                          Eigen::MatrixXd* probs_out = nullptr);

/// Window must hold exactly config.n_history scaled frames (throws
/// std::invalid_argument otherwise).
ForwardResult forward(std::span<const FeatureFrame> window,
                      const ModelParams& params);

/// Contact masking: left gain block scaled by mu_L, right by mu_R.
GainMatrix mask_gain(const GainMatrix& raw, const ContactState& mu);

/// Exact reverse-mode gradients of every parameter given d(loss)/d(raw gain).
ModelParams backward(const ModelParams& params, const ForwardTrace& trace,
                     const Eigen::Matrix<double, kGainRows, kGainCols>& dgain);

/// Sinusoidal positional encoding table (rows x d_model).
Eigen::MatrixXd positional_encoding(int rows, int d_model);

}  // namespace ikf
