// SPDX-License-Identifier: Apache-2.0

#include "inekformer/gainformer.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <random>
#include <stdexcept>

namespace ikf {

using Eigen::MatrixXd;
using Eigen::VectorXd;

std::string to_string(Activation a) {
  switch (a) {
    case Activation::kGelu: return "gelu";
    case Activation::kRelu: return "relu";
    case Activation::kTanh: return "tanh";
  }
  return "gelu";
}

Activation activation_from_string(const std::string& name) {
  if (name == "gelu") return Activation::kGelu;
  if (name == "relu") return Activation::kRelu;
  if (name == "tanh") return Activation::kTanh;
  throw std::invalid_argument("unknown activation: " + name);
}

namespace {

constexpr double kLayerNormEps = 1e-5;

double gelu(double x) {
  return 0.5 * x * (1.0 + std::erf(x / std::numbers::sqrt2));
}

double gelu_grad(double x) {
  const double cdf = 0.5 * (1.0 + std::erf(x / std::numbers::sqrt2));
  const double pdf =
      std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi);
  return cdf + x * pdf;
}

MatrixXd apply_activation(Activation a, const MatrixXd& x) {
  switch (a) {
    case Activation::kGelu: return x.unaryExpr([](double v) { return gelu(v); });
    case Activation::kRelu: return x.cwiseMax(0.0);
    case Activation::kTanh: return x.array().tanh().matrix();
  }
  return x;
}

MatrixXd activation_grad(Activation a, const MatrixXd& pre_act) {
  switch (a) {
    case Activation::kGelu:
      return pre_act.unaryExpr([](double v) { return gelu_grad(v); });
    case Activation::kRelu:
      return pre_act.unaryExpr([](double v) { return v > 0.0 ? 1.0 : 0.0; });
    case Activation::kTanh: {
      const MatrixXd t = pre_act.array().tanh().matrix();
      return (1.0 - t.array().square()).matrix();
    }
  }
  return MatrixXd::Ones(pre_act.rows(), pre_act.cols());
}

MatrixXd linear_forward(const LinearLayer& l, const MatrixXd& x,
                        LinearCache* cache) {
  if (cache) cache->input = x;
  return (x * l.w).rowwise() + l.b.transpose();
}

MatrixXd linear_backward(const LinearLayer& l, const LinearCache& cache,
                         const MatrixXd& dout, LinearLayer& grad) {
  grad.w += cache.input.transpose() * dout;
  grad.b += dout.colwise().sum().transpose();
  return dout * l.w.transpose();
}

MatrixXd layer_norm_forward(const LayerNormLayer& l, const MatrixXd& x,
                            LayerNormCache* cache) {
  const Eigen::Index rows = x.rows(), cols = x.cols();
  MatrixXd normalized(rows, cols);
  VectorXd inv_std(rows);
  for (Eigen::Index r = 0; r < rows; ++r) {
    const double mean = x.row(r).mean();
    const double var = (x.row(r).array() - mean).square().mean();
    inv_std[r] = 1.0 / std::sqrt(var + kLayerNormEps);
    normalized.row(r) = (x.row(r).array() - mean) * inv_std[r];
  }
  if (cache) {
    cache->normalized = normalized;
    cache->inv_std = inv_std;
  }
  MatrixXd out = normalized;
  out.array().rowwise() *= l.gain.transpose().array();
  out.array().rowwise() += l.bias.transpose().array();
  return out;
}

MatrixXd layer_norm_backward(const LayerNormLayer& l,
                             const LayerNormCache& cache, const MatrixXd& dout,
                             LayerNormLayer& grad) {
  grad.gain += (dout.array() * cache.normalized.array())
                   .colwise()
                   .sum()
                   .transpose()
                   .matrix();
  grad.bias += dout.colwise().sum().transpose();

  const Eigen::Index rows = dout.rows();
  MatrixXd dx(rows, dout.cols());
  for (Eigen::Index r = 0; r < rows; ++r) {
    const Eigen::ArrayXd dg =
        dout.row(r).transpose().array() * l.gain.array();
    const Eigen::ArrayXd xhat = cache.normalized.row(r).transpose().array();
    const double mean_dg = dg.mean();
    const double mean_dg_xhat = (dg * xhat).mean();
    dx.row(r) = (cache.inv_std[r] * (dg - mean_dg - xhat * mean_dg_xhat))
                    .matrix()
                    .transpose();
  }
  return dx;
}

// Multi-head attention over projected q/k/v; kv_in supplies keys and values.
MatrixXd attention_forward(const AttentionLayer& l, const ModelConfig& cfg,
                           const MatrixXd& query_in, const MatrixXd& kv_in,
                           bool causal, AttentionCache* cache) {
  const int d_head = cfg.d_model / cfg.n_heads;
  const double scale = 1.0 / std::sqrt(static_cast<double>(d_head));

  LinearCache q_cache, k_cache, v_cache;
  const MatrixXd q = linear_forward(l.query, query_in, &q_cache);
  const MatrixXd k = linear_forward(l.key, kv_in, &k_cache);
  const MatrixXd v = linear_forward(l.value, kv_in, &v_cache);

  const Eigen::Index tq = q.rows(), tk = k.rows();
  MatrixXd context(tq, cfg.d_model);
  std::vector<MatrixXd> probs(cfg.n_heads);
  for (int h = 0; h < cfg.n_heads; ++h) {
    const auto qh = q.middleCols(h * d_head, d_head);
    const auto kh = k.middleCols(h * d_head, d_head);
    const auto vh = v.middleCols(h * d_head, d_head);
    MatrixXd scores = scale * (qh * kh.transpose());
    if (causal) {
      for (Eigen::Index i = 0; i < tq; ++i)
        for (Eigen::Index j = i + 1; j < tk; ++j)
          scores(i, j) = -std::numeric_limits<double>::infinity();
    }
    MatrixXd p(tq, tk);
    for (Eigen::Index i = 0; i < tq; ++i) {
      const double m = scores.row(i).maxCoeff();
      const Eigen::ArrayXd e = (scores.row(i).transpose().array() - m).exp();
      p.row(i) = (e / e.sum()).transpose().matrix();
    }
    context.middleCols(h * d_head, d_head) = p * vh;
    probs[h] = std::move(p);
  }

  LinearCache out_cache;
  const MatrixXd out = linear_forward(l.output, context, &out_cache);
  if (cache) {
    cache->q = q;
    cache->k = k;
    cache->v = v;
    cache->probs = std::move(probs);
    cache->context = context;
    cache->query_in = q_cache;
    cache->kv_in = k_cache;  // same source feeds key and value
  }
  return out;
}

// Returns d(query_in); d(kv_in) is accumulated into dkv_in.
MatrixXd attention_backward(const AttentionLayer& l, const ModelConfig& cfg,
                            const AttentionCache& cache, const MatrixXd& dout,
                            AttentionLayer& grad, MatrixXd& dkv_in) {
  const int d_head = cfg.d_model / cfg.n_heads;
  const double scale = 1.0 / std::sqrt(static_cast<double>(d_head));

  LinearCache out_cache{cache.context};
  const MatrixXd dcontext = linear_backward(l.output, out_cache, dout, grad.output);

  const Eigen::Index tq = cache.q.rows(), tk = cache.k.rows();
  MatrixXd dq(tq, cfg.d_model), dk(tk, cfg.d_model), dv(tk, cfg.d_model);
  for (int h = 0; h < cfg.n_heads; ++h) {
    const auto qh = cache.q.middleCols(h * d_head, d_head);
    const auto kh = cache.k.middleCols(h * d_head, d_head);
    const auto vh = cache.v.middleCols(h * d_head, d_head);
    const MatrixXd& p = cache.probs[h];
    const auto dch = dcontext.middleCols(h * d_head, d_head);

    const MatrixXd dp = dch * vh.transpose();
    dv.middleCols(h * d_head, d_head) = p.transpose() * dch;

    // softmax backward: ds = p .* (dp - rowsum(dp .* p))
    MatrixXd ds(tq, tk);
    for (Eigen::Index i = 0; i < tq; ++i) {
      const double dot = dp.row(i).dot(p.row(i));
      ds.row(i) = (p.row(i).array() * (dp.row(i).array() - dot)).matrix();
    }
    dq.middleCols(h * d_head, d_head) = scale * (ds * kh);
    dk.middleCols(h * d_head, d_head) = scale * (ds.transpose() * qh);
  }

  const MatrixXd dquery_in = linear_backward(l.query, cache.query_in, dq, grad.query);
  dkv_in += linear_backward(l.key, cache.kv_in, dk, grad.key);
  dkv_in += linear_backward(l.value, cache.kv_in, dv, grad.value);
  return dquery_in;
}

MatrixXd ffn_forward(const LinearLayer& ff_in, const LinearLayer& ff_out,
                     Activation act, const MatrixXd& x, FfnCache* cache) {
  LinearCache in_cache;
  const MatrixXd pre = linear_forward(ff_in, x, &in_cache);
  const MatrixXd activated = apply_activation(act, pre);
  LinearCache act_cache{activated};
  const MatrixXd out = linear_forward(ff_out, activated, &act_cache);
  if (cache) {
    cache->input = in_cache;
    cache->pre_act = pre;
    cache->activated = act_cache;
  }
  return out;
}

MatrixXd ffn_backward(const LinearLayer& ff_in, const LinearLayer& ff_out,
                      Activation act, const FfnCache& cache,
                      const MatrixXd& dout, LinearLayer& grad_in,
                      LinearLayer& grad_out) {
  const MatrixXd dact = linear_backward(ff_out, cache.activated, dout, grad_out);
  const MatrixXd dpre =
      (dact.array() * activation_grad(act, cache.pre_act).array()).matrix();
  return linear_backward(ff_in, cache.input, dpre, grad_in);
}

LinearLayer make_linear(int in, int out, std::mt19937_64* rng,
                        double scale = 1.0) {
  LinearLayer l;
  l.w = MatrixXd::Zero(in, out);
  l.b = VectorXd::Zero(out);
  if (rng) {
    std::normal_distribution<double> dist(
        0.0, scale * std::sqrt(2.0 / static_cast<double>(in + out)));
    for (Eigen::Index i = 0; i < l.w.size(); ++i) l.w.data()[i] = dist(*rng);
  }
  return l;
}

LayerNormLayer make_layer_norm(int dim, bool init_ones) {
  LayerNormLayer l;
  l.gain = init_ones ? VectorXd::Ones(dim) : VectorXd::Zero(dim);
  l.bias = VectorXd::Zero(dim);
  return l;
}

AttentionLayer make_attention(int d_model, std::mt19937_64* rng) {
  return {make_linear(d_model, d_model, rng), make_linear(d_model, d_model, rng),
          make_linear(d_model, d_model, rng),
          make_linear(d_model, d_model, rng)};
}

ModelParams make_params(const ModelConfig& config, std::mt19937_64* rng) {
  if (config.d_model % config.n_heads != 0)
    throw std::invalid_argument("d_model must be divisible by n_heads");
  const bool ones = rng != nullptr;
  ModelParams p;
  p.config = config;
  p.embed_obs = make_linear(kObsFeatureDim, config.d_model, rng);
  p.embed_state = make_linear(kStateFeatureDim, config.d_model, rng);
  for (int i = 0; i < config.n_encoder_layers; ++i) {
    EncoderBlock b;
    b.ln_attn = make_layer_norm(config.d_model, ones);
    b.attn = make_attention(config.d_model, rng);
    b.ln_ff = make_layer_norm(config.d_model, ones);
    b.ff_in = make_linear(config.d_model, config.d_ff, rng);
    b.ff_out = make_linear(config.d_ff, config.d_model, rng);
    p.encoder.push_back(std::move(b));
  }
  p.encoder_norm = make_layer_norm(config.d_model, ones);
  for (int i = 0; i < config.n_decoder_layers; ++i) {
    DecoderBlock b;
    b.ln_self = make_layer_norm(config.d_model, ones);
    b.self_attn = make_attention(config.d_model, rng);
    b.ln_cross = make_layer_norm(config.d_model, ones);
    b.cross_attn = make_attention(config.d_model, rng);
    b.ln_ff = make_layer_norm(config.d_model, ones);
    b.ff_in = make_linear(config.d_model, config.d_ff, rng);
    b.ff_out = make_linear(config.d_ff, config.d_model, rng);
    p.decoder.push_back(std::move(b));
  }
  p.decoder_norm = make_layer_norm(config.d_model, ones);
  p.head = make_linear(config.d_model, kGainDim, rng, 0.1);
  return p;
}

void collect_linear(LinearLayer& l, std::vector<TensorView>& out) {
  out.push_back({l.w.data(), l.w.size()});
  out.push_back({l.b.data(), l.b.size()});
}

void collect_layer_norm(LayerNormLayer& l, std::vector<TensorView>& out) {
  out.push_back({l.gain.data(), l.gain.size()});
  out.push_back({l.bias.data(), l.bias.size()});
}

void collect_attention(AttentionLayer& l, std::vector<TensorView>& out) {
  collect_linear(l.query, out);
  collect_linear(l.key, out);
  collect_linear(l.value, out);
  collect_linear(l.output, out);
}

}  // namespace

ModelParams init_params(const ModelConfig& config, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  return make_params(config, &rng);
}

ModelParams zeros_like(const ModelParams& params) {
  return make_params(params.config, nullptr);
}

std::vector<TensorView> tensor_views(ModelParams& params) {
  std::vector<TensorView> out;
  collect_linear(params.embed_obs, out);
  collect_linear(params.embed_state, out);
  for (auto& b : params.encoder) {
    collect_layer_norm(b.ln_attn, out);
    collect_attention(b.attn, out);
    collect_layer_norm(b.ln_ff, out);
    collect_linear(b.ff_in, out);
    collect_linear(b.ff_out, out);
  }
  collect_layer_norm(params.encoder_norm, out);
  for (auto& b : params.decoder) {
    collect_layer_norm(b.ln_self, out);
    collect_attention(b.self_attn, out);
    collect_layer_norm(b.ln_cross, out);
    collect_attention(b.cross_attn, out);
    collect_layer_norm(b.ln_ff, out);
    collect_linear(b.ff_in, out);
    collect_linear(b.ff_out, out);
  }
  collect_layer_norm(params.decoder_norm, out);
  collect_linear(params.head, out);
  return out;
}

std::size_t parameter_count(const ModelParams& params) {
  std::size_t n = 0;
  for (const auto& v : tensor_views(const_cast<ModelParams&>(params)))
    n += static_cast<std::size_t>(v.size);
  return n;
}

Eigen::MatrixXd positional_encoding(int rows, int d_model) {
  MatrixXd pe(rows, d_model);
  for (int pos = 0; pos < rows; ++pos) {
    for (int i = 0; i < d_model / 2; ++i) {
      const double freq =
          std::pow(10000.0, -2.0 * static_cast<double>(i) / d_model);
      pe(pos, 2 * i) = std::sin(pos * freq);
      pe(pos, 2 * i + 1) = std::cos(pos * freq);
    }
  }
  return pe;
}

Eigen::MatrixXd attention(const Eigen::MatrixXd& q, const Eigen::MatrixXd& k,
                          const Eigen::MatrixXd& v, bool causal,
                          Eigen::MatrixXd* probs_out) {
  const double scale = 1.0 / std::sqrt(static_cast<double>(q.cols()));
  MatrixXd scores = scale * (q * k.transpose());
  if (causal) {
    for (Eigen::Index i = 0; i < scores.rows(); ++i)
      for (Eigen::Index j = i + 1; j < scores.cols(); ++j)
        scores(i, j) = -std::numeric_limits<double>::infinity();
  }
  MatrixXd p(scores.rows(), scores.cols());
  for (Eigen::Index i = 0; i < scores.rows(); ++i) {
    const double m = scores.row(i).maxCoeff();
    const Eigen::ArrayXd e = (scores.row(i).transpose().array() - m).exp();
    p.row(i) = (e / e.sum()).transpose().matrix();
  }
  if (probs_out) *probs_out = p;
  return p * v;
}

ForwardResult forward(std::span<const FeatureFrame> window,
                      const ModelParams& params) {
  const ModelConfig& cfg = params.config;
  const auto t = static_cast<Eigen::Index>(window.size());
  if (t != cfg.n_history)
    throw std::invalid_argument("forward: window length " +
                                std::to_string(window.size()) +
                                " != n_history " +
                                std::to_string(cfg.n_history));

  MatrixXd enc_in(t, kObsFeatureDim), dec_in(t, kStateFeatureDim);
  for (Eigen::Index i = 0; i < t; ++i) {
    enc_in.row(i) = window[i].encoder_input().transpose();
    dec_in.row(i) = window[i].decoder_input().transpose();
  }

  ForwardResult result;
  ForwardTrace& trace = result.trace;
  trace.enc_blocks.resize(params.encoder.size());
  trace.dec_blocks.resize(params.decoder.size());

  const MatrixXd pe = cfg.use_positional_encoding
                          ? positional_encoding(cfg.n_history, cfg.d_model)
                          : MatrixXd::Zero(cfg.n_history, cfg.d_model);

  MatrixXd x = linear_forward(params.embed_obs, enc_in, &trace.embed_obs) + pe;
  for (size_t i = 0; i < params.encoder.size(); ++i) {
    const EncoderBlock& b = params.encoder[i];
    EncoderBlockCache& c = trace.enc_blocks[i];
    const MatrixXd n1 = layer_norm_forward(b.ln_attn, x, &c.ln_attn);
    x += attention_forward(b.attn, cfg, n1, n1, /*causal=*/false, &c.attn);
    const MatrixXd n2 = layer_norm_forward(b.ln_ff, x, &c.ln_ff);
    x += ffn_forward(b.ff_in, b.ff_out, cfg.activation, n2, &c.ffn);
  }
  trace.memory = layer_norm_forward(params.encoder_norm, x, &trace.encoder_norm);

  MatrixXd y =
      linear_forward(params.embed_state, dec_in, &trace.embed_state) + pe;
  for (size_t i = 0; i < params.decoder.size(); ++i) {
    const DecoderBlock& b = params.decoder[i];
    DecoderBlockCache& c = trace.dec_blocks[i];
    const MatrixXd n1 = layer_norm_forward(b.ln_self, y, &c.ln_self);
    y += attention_forward(b.self_attn, cfg, n1, n1, /*causal=*/true,
                           &c.self_attn);
    const MatrixXd n2 = layer_norm_forward(b.ln_cross, y, &c.ln_cross);
    y += attention_forward(b.cross_attn, cfg, n2, trace.memory,
                           /*causal=*/false, &c.cross_attn);
    const MatrixXd n3 = layer_norm_forward(b.ln_ff, y, &c.ln_ff);
    y += ffn_forward(b.ff_in, b.ff_out, cfg.activation, n3, &c.ffn);
  }
  const MatrixXd z = layer_norm_forward(params.decoder_norm, y, &trace.decoder_norm);

  const MatrixXd out = linear_forward(params.head, z.row(t - 1), &trace.head);
  for (int r = 0; r < kGainRows; ++r)
    for (int col = 0; col < kGainCols; ++col)
      result.gain.k(r, col) = out(0, r * kGainCols + col);
  return result;
}

GainMatrix mask_gain(const GainMatrix& raw, const ContactState& mu) {
  GainMatrix out;
  out.left() = mu.mu_left * raw.left();
  out.right() = mu.mu_right * raw.right();
  return out;
}

ModelParams backward(const ModelParams& params, const ForwardTrace& trace,
                     const Eigen::Matrix<double, kGainRows, kGainCols>& dgain) {
  const ModelConfig& cfg = params.config;
  ModelParams grads = zeros_like(params);

  Eigen::Matrix<double, 1, kGainDim> dout;
  for (int r = 0; r < kGainRows; ++r)
    for (int c = 0; c < kGainCols; ++c) dout(0, r * kGainCols + c) = dgain(r, c);

  const MatrixXd dlast = linear_backward(params.head, trace.head, dout, grads.head);
  MatrixXd dz = MatrixXd::Zero(cfg.n_history, cfg.d_model);
  dz.row(cfg.n_history - 1) = dlast;

  MatrixXd dy = layer_norm_backward(params.decoder_norm, trace.decoder_norm,
                                    dz, grads.decoder_norm);
  MatrixXd dmemory = MatrixXd::Zero(cfg.n_history, cfg.d_model);
  for (int i = static_cast<int>(params.decoder.size()) - 1; i >= 0; --i) {
    const DecoderBlock& b = params.decoder[i];
    const DecoderBlockCache& c = trace.dec_blocks[i];
    DecoderBlock& g = grads.decoder[i];

    const MatrixXd dn3 = ffn_backward(b.ff_in, b.ff_out, cfg.activation, c.ffn,
                                      dy, g.ff_in, g.ff_out);
    dy += layer_norm_backward(b.ln_ff, c.ln_ff, dn3, g.ln_ff);

    const MatrixXd dn2 = attention_backward(b.cross_attn, cfg, c.cross_attn,
                                            dy, g.cross_attn, dmemory);
    dy += layer_norm_backward(b.ln_cross, c.ln_cross, dn2, g.ln_cross);

    MatrixXd dself_kv = MatrixXd::Zero(cfg.n_history, cfg.d_model);
    MatrixXd dn1 = attention_backward(b.self_attn, cfg, c.self_attn, dy,
                                      g.self_attn, dself_kv);
    dn1 += dself_kv;
    dy += layer_norm_backward(b.ln_self, c.ln_self, dn1, g.ln_self);
  }
  linear_backward(params.embed_state, trace.embed_state, dy, grads.embed_state);

  MatrixXd dx = layer_norm_backward(params.encoder_norm, trace.encoder_norm,
                                    dmemory, grads.encoder_norm);
  for (int i = static_cast<int>(params.encoder.size()) - 1; i >= 0; --i) {
    const EncoderBlock& b = params.encoder[i];
    const EncoderBlockCache& c = trace.enc_blocks[i];
    EncoderBlock& g = grads.encoder[i];

    const MatrixXd dn2 = ffn_backward(b.ff_in, b.ff_out, cfg.activation, c.ffn,
                                      dx, g.ff_in, g.ff_out);
    dx += layer_norm_backward(b.ln_ff, c.ln_ff, dn2, g.ln_ff);

    MatrixXd dattn_kv = MatrixXd::Zero(cfg.n_history, cfg.d_model);
    MatrixXd dn1 =
        attention_backward(b.attn, cfg, c.attn, dx, g.attn, dattn_kv);
    dn1 += dattn_kv;
    dx += layer_norm_backward(b.ln_attn, c.ln_attn, dn1, g.ln_attn);
  }
  linear_backward(params.embed_obs, trace.embed_obs, dx, grads.embed_obs);

  return grads;
}

}  // namespace ikf
