// Copyright 2026 The prunesearch Authors.
// SPDX-License-Identifier: Apache-2.0

#include "prunesearch/encoder.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>

#include "prunesearch/errors.hpp"
#include "prunesearch/rng.hpp"

namespace prunesearch {

namespace {

constexpr double kLayerNormEps = 1e-5;
constexpr double kInvSqrt2 = 0.70710678118654752440;
constexpr double kInvSqrt2Pi = 0.39894228040143267794;

// Visits every tensor in canonical order. `Model` may be const.
template <typename Model, typename F>
void for_each_tensor(Model& m, F&& f) {
  f(std::string("embeddings.token"), m.token_embedding);
  f(std::string("embeddings.position"), m.position_embedding);
  for (std::size_t i = 0; i < m.layers.size(); ++i) {
    auto& l = m.layers[i];
    const std::string p = "layers." + std::to_string(i) + ".";
    f(p + "attn.wq", l.wq);
    f(p + "attn.bq", l.bq);
    f(p + "attn.wk", l.wk);
    f(p + "attn.bk", l.bk);
    f(p + "attn.wv", l.wv);
    f(p + "attn.bv", l.bv);
    f(p + "attn.wo", l.wo);
    f(p + "attn.bo", l.bo);
    f(p + "ln1.gain", l.ln1_gain);
    f(p + "ln1.bias", l.ln1_bias);
    f(p + "ffn.w1", l.w1);
    f(p + "ffn.b1", l.b1);
    f(p + "ffn.w2", l.w2);
    f(p + "ffn.b2", l.b2);
    f(p + "ln2.gain", l.ln2_gain);
    f(p + "ln2.bias", l.ln2_bias);
  }
  f(std::string("head.weight"), m.head_weight);
  f(std::string("head.bias"), m.head_bias);
}

template <typename T>
void add_bias(Matrix<T>& x, const Matrix<T>& bias) {
  for (std::size_t r = 0; r < x.rows(); ++r) {
    auto row = x.row(r);
    for (std::size_t c = 0; c < row.size(); ++c) row[c] += bias(0, c);
  }
}

template <typename T>
Matrix<T> linear(const Matrix<T>& x, const Matrix<T>& w, const Matrix<T>& b) {
  Matrix<T> y = dense_matmul(x, w);
  add_bias(y, b);
  return y;
}

DenseMatrix linear(const DenseMatrix& x, const SparseMatrixCSR& w,
                   const DenseMatrix& b) {
  DenseMatrix y = dense_csr_matmul(x, w);
  add_bias(y, b);
  return y;
}

template <typename T>
void add_in_place(Matrix<T>& a, const Matrix<T>& b) {
  auto av = a.values();
  auto bv = b.values();
  for (std::size_t i = 0; i < av.size(); ++i) av[i] += bv[i];
}

// Adds column sums of `g` into the 1xN row `bias_grad`.
template <typename T>
void accumulate_column_sums(Matrix<T>& bias_grad, const Matrix<T>& g) {
  for (std::size_t c = 0; c < g.cols(); ++c) {
    double s = 0.0;
    for (std::size_t r = 0; r < g.rows(); ++r) s += g(r, c);
    bias_grad(0, c) += static_cast<T>(s);
  }
}

double gelu(double x) { return 0.5 * x * (1.0 + std::erf(x * kInvSqrt2)); }

double gelu_grad(double x) {
  const double cdf = 0.5 * (1.0 + std::erf(x * kInvSqrt2));
  return cdf + x * kInvSqrt2Pi * std::exp(-0.5 * x * x);
}

template <typename T>
struct NormCache {
  Matrix<T> normalized;  // (x - mean) * rstd, before gain/bias
  std::vector<double> rstd;
};

template <typename T>
Matrix<T> layer_norm(const Matrix<T>& x, const Matrix<T>& gain,
                     const Matrix<T>& bias, NormCache<T>* cache) {
  const std::size_t n = x.cols();
  Matrix<T> out(x.rows(), n);
  Matrix<T> normalized(x.rows(), n);
  std::vector<double> rstds(x.rows());
  for (std::size_t r = 0; r < x.rows(); ++r) {
    const auto row = x.row(r);
    double mean = 0.0;
    for (T v : row) mean += v;
    mean /= static_cast<double>(n);
    double var = 0.0;
    for (T v : row) var += (v - mean) * (v - mean);
    var /= static_cast<double>(n);
    const double rstd = 1.0 / std::sqrt(var + kLayerNormEps);
    rstds[r] = rstd;
    for (std::size_t c = 0; c < n; ++c) {
      const double h = (row[c] - mean) * rstd;
      normalized(r, c) = static_cast<T>(h);
      out(r, c) = static_cast<T>(h * gain(0, c) + bias(0, c));
    }
  }
  if (cache != nullptr) {
    cache->normalized = std::move(normalized);
    cache->rstd = std::move(rstds);
  }
  return out;
}

// Returns dL/dx given dL/dy; accumulates gain and bias gradients.
template <typename T>
Matrix<T> layer_norm_backward(const Matrix<T>& dy, const NormCache<T>& cache,
                              const Matrix<T>& gain, Matrix<T>& dgain,
                              Matrix<T>& dbias) {
  const std::size_t n = dy.cols();
  Matrix<T> dx(dy.rows(), n);
  std::vector<double> dhat(n);
  for (std::size_t r = 0; r < dy.rows(); ++r) {
    double sum_dhat = 0.0, sum_dhat_h = 0.0;
    for (std::size_t c = 0; c < n; ++c) {
      const double h = cache.normalized(r, c);
      const double g = dy(r, c);
      dgain(0, c) += static_cast<T>(g * h);
      dbias(0, c) += static_cast<T>(g);
      dhat[c] = g * gain(0, c);
      sum_dhat += dhat[c];
      sum_dhat_h += dhat[c] * h;
    }
    const double inv_n = 1.0 / static_cast<double>(n);
    for (std::size_t c = 0; c < n; ++c) {
      const double h = cache.normalized(r, c);
      dx(r, c) = static_cast<T>(cache.rstd[r] *
                                (dhat[c] - inv_n * sum_dhat - h * inv_n * sum_dhat_h));
    }
  }
  return dx;
}

template <typename T>
struct LayerCache {
  Matrix<T> input;
  Matrix<T> q, k, v;
  std::vector<Matrix<T>> probs;  // per head
  Matrix<T> context;
  NormCache<T> norm1;
  Matrix<T> norm1_out;
  Matrix<T> ffn_pre;
  Matrix<T> ffn_act;
  NormCache<T> norm2;
};

template <typename T>
struct ExampleCache {
  std::vector<LayerCache<T>> layers;
  Matrix<T> pooled;  // 1 x H
};

// Multi-head scaled dot-product attention over one sequence. Keys at padded
// positions receive probability exactly zero.
template <typename T>
Matrix<T> attention(const Matrix<T>& q, const Matrix<T>& k, const Matrix<T>& v,
                    const std::vector<std::uint8_t>& mask,
                    std::size_t num_heads, std::vector<Matrix<T>>* probs_out) {
  const std::size_t seq = q.rows();
  const std::size_t hidden = q.cols();
  const std::size_t d = hidden / num_heads;
  const double scale = 1.0 / std::sqrt(static_cast<double>(d));
  Matrix<T> context(seq, hidden);
  std::vector<double> scores(seq);
  if (probs_out) probs_out->assign(num_heads, Matrix<T>(seq, seq));
  for (std::size_t h = 0; h < num_heads; ++h) {
    const std::size_t off = h * d;
    for (std::size_t i = 0; i < seq; ++i) {
      double max_score = -std::numeric_limits<double>::infinity();
      for (std::size_t j = 0; j < seq; ++j) {
        if (!mask[j]) continue;
        double s = 0.0;
        for (std::size_t c = 0; c < d; ++c)
          s += static_cast<double>(q(i, off + c)) * k(j, off + c);
        scores[j] = s * scale;
        max_score = std::max(max_score, scores[j]);
      }
      double denom = 0.0;
      for (std::size_t j = 0; j < seq; ++j) {
        if (!mask[j]) continue;
        scores[j] = std::exp(scores[j] - max_score);
        denom += scores[j];
      }
      for (std::size_t j = 0; j < seq; ++j) {
        const double p = mask[j] ? scores[j] / denom : 0.0;
        scores[j] = p;
        if (probs_out) (*probs_out)[h](i, j) = static_cast<T>(p);
      }
      for (std::size_t c = 0; c < d; ++c) {
        double acc = 0.0;
        for (std::size_t j = 0; j < seq; ++j) {
          if (scores[j] != 0.0) acc += scores[j] * v(j, off + c);
        }
        context(i, off + c) = static_cast<T>(acc);
      }
    }
  }
  return context;
}

template <typename T, typename Model>
Matrix<T> embed(const Model& model, const std::vector<std::int32_t>& ids) {
  const std::size_t hidden = model.config.hidden_size;
  Matrix<T> x(ids.size(), hidden);
  for (std::size_t s = 0; s < ids.size(); ++s) {
    const auto tok = model.token_embedding.row(static_cast<std::size_t>(ids[s]));
    const auto pos = model.position_embedding.row(s);
    for (std::size_t c = 0; c < hidden; ++c) x(s, c) = tok[c] + pos[c];
  }
  return x;
}

// Runs one example through the encoder. Fills `hidden` with per-layer
// outputs and, when requested, the attention maps and backward cache.
template <typename T, typename Model>
Matrix<T> forward_example(const Model& model,
                          const std::vector<std::int32_t>& ids,
                          const std::vector<std::uint8_t>& mask,
                          std::vector<Matrix<T>>* hidden,
                          std::vector<std::vector<Matrix<T>>>* attention_maps,
                          ExampleCache<T>* cache) {
  const EncoderConfig& cfg = model.config;
  Matrix<T> x = embed<T>(model, ids);
  if (cache) cache->layers.resize(cfg.num_layers);
  for (std::size_t l = 0; l < cfg.num_layers; ++l) {
    const auto& w = model.layers[l];
    LayerCache<T>* lc = cache ? &cache->layers[l] : nullptr;
    Matrix<T> q = linear(x, w.wq, w.bq);
    Matrix<T> k = linear(x, w.wk, w.bk);
    Matrix<T> v = linear(x, w.wv, w.bv);
    std::vector<Matrix<T>> probs;
    const bool want_probs = lc != nullptr || attention_maps != nullptr;
    Matrix<T> context =
        attention(q, k, v, mask, cfg.num_heads, want_probs ? &probs : nullptr);
    Matrix<T> residual = linear(context, w.wo, w.bo);
    add_in_place(residual, x);
    NormCache<T>* n1 = lc ? &lc->norm1 : nullptr;
    Matrix<T> y1 = layer_norm(residual, w.ln1_gain, w.ln1_bias, n1);

    Matrix<T> pre = linear(y1, w.w1, w.b1);
    Matrix<T> act(pre.rows(), pre.cols());
    {
      auto pv = pre.values();
      auto av = act.values();
      for (std::size_t i = 0; i < pv.size(); ++i)
        av[i] = static_cast<T>(gelu(pv[i]));
    }
    Matrix<T> ffn_out = linear(act, w.w2, w.b2);
    add_in_place(ffn_out, y1);
    NormCache<T>* n2 = lc ? &lc->norm2 : nullptr;
    Matrix<T> y2 = layer_norm(ffn_out, w.ln2_gain, w.ln2_bias, n2);

    if (attention_maps) attention_maps->push_back(probs);
    if (lc) {
      lc->input = std::move(x);
      lc->q = std::move(q);
      lc->k = std::move(k);
      lc->v = std::move(v);
      lc->probs = std::move(probs);
      lc->context = std::move(context);
      lc->norm1_out = y1;
      lc->ffn_pre = std::move(pre);
      lc->ffn_act = std::move(act);
    }
    if (hidden) hidden->push_back(y2);
    x = std::move(y2);
  }
  Matrix<T> pooled(1, cfg.hidden_size);
  for (std::size_t c = 0; c < cfg.hidden_size; ++c) pooled(0, c) = x(0, c);
  Matrix<T> logits = linear(pooled, model.head_weight, model.head_bias);
  if (cache) cache->pooled = std::move(pooled);
  return logits;
}

template <typename T>
void attention_backward(const LayerCache<T>& lc, const Matrix<T>& dcontext,
                        std::size_t num_heads, Matrix<T>& dq, Matrix<T>& dk,
                        Matrix<T>& dv) {
  const std::size_t seq = lc.q.rows();
  const std::size_t hidden = lc.q.cols();
  const std::size_t d = hidden / num_heads;
  const double scale = 1.0 / std::sqrt(static_cast<double>(d));
  dq = Matrix<T>(seq, hidden);
  dk = Matrix<T>(seq, hidden);
  dv = Matrix<T>(seq, hidden);
  std::vector<double> dp(seq), ds(seq);
  for (std::size_t h = 0; h < num_heads; ++h) {
    const std::size_t off = h * d;
    const Matrix<T>& p = lc.probs[h];
    for (std::size_t i = 0; i < seq; ++i) {
      // dP_ij = <dcontext_i, v_j>; dS = P o (dP - sum_j P_ij dP_ij)
      double dot = 0.0;
      for (std::size_t j = 0; j < seq; ++j) {
        double s = 0.0;
        for (std::size_t c = 0; c < d; ++c)
          s += static_cast<double>(dcontext(i, off + c)) * lc.v(j, off + c);
        dp[j] = s;
        dot += p(i, j) * s;
      }
      for (std::size_t j = 0; j < seq; ++j) {
        ds[j] = p(i, j) * (dp[j] - dot) * scale;
      }
      for (std::size_t j = 0; j < seq; ++j) {
        const double pij = p(i, j);
        if (pij == 0.0 && ds[j] == 0.0) continue;
        for (std::size_t c = 0; c < d; ++c) {
          dv(j, off + c) += static_cast<T>(pij * dcontext(i, off + c));
          dq(i, off + c) += static_cast<T>(ds[j] * lc.k(j, off + c));
          dk(j, off + c) += static_cast<T>(ds[j] * lc.q(i, off + c));
        }
      }
    }
  }
}

// Backpropagates one example. `dlogits` is 1 x outputs; `dhidden[l]` (may be
// empty) is an extra gradient on the output of layer l.
template <typename T>
void backward_example(const BasicModel<T>& model, const ExampleCache<T>& cache,
                      const std::vector<std::int32_t>& ids,
                      const Matrix<T>& dlogits,
                      const std::vector<Matrix<T>>& dhidden,
                      BasicModel<T>& grads) {
  const EncoderConfig& cfg = model.config;
  const std::size_t seq = ids.size();
  add_in_place(grads.head_weight, matmul_transposed_a(cache.pooled, dlogits));
  add_in_place(grads.head_bias, dlogits);
  Matrix<T> dpooled = matmul_transposed_b(dlogits, model.head_weight);
  Matrix<T> dx(seq, cfg.hidden_size);
  for (std::size_t c = 0; c < cfg.hidden_size; ++c) dx(0, c) = dpooled(0, c);

  for (std::size_t l = cfg.num_layers; l-- > 0;) {
    const auto& w = model.layers[l];
    auto& g = grads.layers[l];
    const LayerCache<T>& lc = cache.layers[l];
    if (!dhidden.empty() && !dhidden[l].empty()) add_in_place(dx, dhidden[l]);

    Matrix<T> dres2 =
        layer_norm_backward(dx, lc.norm2, w.ln2_gain, g.ln2_gain, g.ln2_bias);
    // FFN branch; the residual passes dres2 straight to y1.
    add_in_place(g.w2, matmul_transposed_a(lc.ffn_act, dres2));
    accumulate_column_sums(g.b2, dres2);
    Matrix<T> dact = matmul_transposed_b(dres2, w.w2);
    {
      auto da = dact.values();
      auto pre = lc.ffn_pre.values();
      for (std::size_t i = 0; i < da.size(); ++i)
        da[i] = static_cast<T>(da[i] * gelu_grad(pre[i]));
    }
    add_in_place(g.w1, matmul_transposed_a(lc.norm1_out, dact));
    accumulate_column_sums(g.b1, dact);
    Matrix<T> dy1 = matmul_transposed_b(dact, w.w1);
    add_in_place(dy1, dres2);

    Matrix<T> dres1 =
        layer_norm_backward(dy1, lc.norm1, w.ln1_gain, g.ln1_gain, g.ln1_bias);
    add_in_place(g.wo, matmul_transposed_a(lc.context, dres1));
    accumulate_column_sums(g.bo, dres1);
    Matrix<T> dcontext = matmul_transposed_b(dres1, w.wo);

    Matrix<T> dq, dk, dv;
    attention_backward(lc, dcontext, cfg.num_heads, dq, dk, dv);
    add_in_place(g.wq, matmul_transposed_a(lc.input, dq));
    accumulate_column_sums(g.bq, dq);
    add_in_place(g.wk, matmul_transposed_a(lc.input, dk));
    accumulate_column_sums(g.bk, dk);
    add_in_place(g.wv, matmul_transposed_a(lc.input, dv));
    accumulate_column_sums(g.bv, dv);

    Matrix<T> dinput = std::move(dres1);
    add_in_place(dinput, matmul_transposed_b(dq, w.wq));
    add_in_place(dinput, matmul_transposed_b(dk, w.wk));
    add_in_place(dinput, matmul_transposed_b(dv, w.wv));
    dx = std::move(dinput);
  }
  for (std::size_t s = 0; s < seq; ++s) {
    auto tok = grads.token_embedding.row(static_cast<std::size_t>(ids[s]));
    auto pos = grads.position_embedding.row(s);
    for (std::size_t c = 0; c < cfg.hidden_size; ++c) {
      tok[c] += dx(s, c);
      pos[c] += dx(s, c);
    }
  }
}

template <typename T, typename Model>
ForwardOutput run_forward(const Model& model, const Batch& batch,
                          bool keep_attention) {
  validate_batch(batch, model.config);
  const EncoderConfig& cfg = model.config;
  ForwardOutput out;
  out.logits = DenseMatrix(batch.size(), cfg.num_outputs);
  out.hidden_states.assign(cfg.num_layers, {});
  if (keep_attention) out.attention.assign(cfg.num_layers, {});
  for (std::size_t b = 0; b < batch.size(); ++b) {
    std::vector<Matrix<T>> hidden;
    std::vector<std::vector<Matrix<T>>> maps;
    Matrix<T> logits =
        forward_example<T>(model, batch.token_ids[b], batch.mask[b], &hidden,
                           keep_attention ? &maps : nullptr, nullptr);
    for (std::size_t o = 0; o < cfg.num_outputs; ++o)
      out.logits(b, o) = static_cast<float>(logits(0, o));
    for (std::size_t l = 0; l < cfg.num_layers; ++l) {
      out.hidden_states[l].push_back(matrix_cast<float>(hidden[l]));
      if (keep_attention) {
        std::vector<DenseMatrix> heads;
        for (auto& m : maps[l]) heads.push_back(matrix_cast<float>(m));
        out.attention[l].push_back(std::move(heads));
      }
    }
  }
  return out;
}

void require_labels(const Batch& batch, LossKind kind,
                    const EncoderConfig& cfg) {
  if (batch.size() == 0) throw InputError("loss on an empty batch");
  const bool regression = batch.is_regression();
  const std::size_t n = regression
                            ? std::get<std::vector<float>>(batch.labels).size()
                            : std::get<std::vector<int>>(batch.labels).size();
  if (n != batch.size()) throw InputError("loss requires one label per example");
  if (kind == LossKind::cross_entropy && regression)
    throw ConfigError("cross_entropy loss requires class labels");
  if (kind == LossKind::mse && !regression)
    throw ConfigError("mse loss requires real-valued targets");
  if (regression && cfg.num_outputs != 1)
    throw ConfigError("regression targets require num_outputs == 1");
  if (!regression) {
    for (int y : std::get<std::vector<int>>(batch.labels)) {
      if (y < 0 || static_cast<std::size_t>(y) >= cfg.num_outputs)
        throw InputError("class label " + std::to_string(y) +
                         " out of range for " + std::to_string(cfg.num_outputs) +
                         " outputs");
    }
  }
}

void require_teacher(const Batch& batch, const LossSpec& spec,
                     const EncoderConfig& cfg) {
  if (spec.kind != LossKind::kd_composite) return;
  if (spec.kd_weight < 0.0 || !std::isfinite(spec.kd_weight))
    throw ConfigError("kd_weight must be finite and >= 0");
  if (spec.teacher == nullptr)
    throw ConfigError("kd_composite loss requires teacher activations");
  const auto& th = spec.teacher->hidden_states;
  if (th.size() != cfg.num_layers)
    throw ConfigError("teacher layer count does not match the student");
  for (const auto& layer : th) {
    if (layer.size() != batch.size())
      throw ConfigError("teacher activations do not match the batch");
    for (std::size_t b = 0; b < batch.size(); ++b) {
      if (layer[b].rows() != batch.token_ids[b].size() ||
          layer[b].cols() != cfg.hidden_size)
        throw ConfigError("teacher hidden state shape does not match");
    }
  }
}

// Task loss of one example; writes dloss/dlogits (unscaled) into `dlogits`.
template <typename T>
double example_task_loss(const Matrix<T>& logits, const Batch& batch,
                         std::size_t b, Matrix<T>* dlogits) {
  if (batch.is_regression()) {
    const double target = std::get<std::vector<float>>(batch.labels)[b];
    const double diff = static_cast<double>(logits(0, 0)) - target;
    if (dlogits) (*dlogits)(0, 0) = static_cast<T>(2.0 * diff);
    return diff * diff;
  }
  const int label = std::get<std::vector<int>>(batch.labels)[b];
  double max_logit = -std::numeric_limits<double>::infinity();
  for (std::size_t o = 0; o < logits.cols(); ++o)
    max_logit = std::max(max_logit, static_cast<double>(logits(0, o)));
  double denom = 0.0;
  for (std::size_t o = 0; o < logits.cols(); ++o)
    denom += std::exp(logits(0, o) - max_logit);
  const double log_z = max_logit + std::log(denom);
  if (dlogits) {
    for (std::size_t o = 0; o < logits.cols(); ++o) {
      const double p = std::exp(logits(0, o) - log_z);
      (*dlogits)(0, o) =
          static_cast<T>(p - (static_cast<int>(o) == label ? 1.0 : 0.0));
    }
  }
  return log_z - logits(0, static_cast<std::size_t>(label));
}

// Layer-averaged MSE against the teacher over real tokens; optionally fills
// the unscaled per-layer gradients.
template <typename T>
double example_distill_loss(const std::vector<Matrix<T>>& hidden,
                            const ForwardOutput& teacher,
                            const std::vector<std::uint8_t>& mask,
                            std::size_t b, std::vector<Matrix<T>>* dhidden) {
  const std::size_t layers = hidden.size();
  std::size_t valid = 0;
  for (auto m : mask) valid += (m != 0);
  const std::size_t hsize = hidden.empty() ? 0 : hidden[0].cols();
  const double norm = 1.0 / static_cast<double>(valid * hsize);
  double total = 0.0;
  if (dhidden) dhidden->assign(layers, Matrix<T>());
  for (std::size_t l = 0; l < layers; ++l) {
    const DenseMatrix& t = teacher.hidden_states[l][b];
    const Matrix<T>& s = hidden[l];
    if (dhidden) (*dhidden)[l] = Matrix<T>(s.rows(), s.cols());
    double sq = 0.0;
    for (std::size_t r = 0; r < s.rows(); ++r) {
      if (!mask[r]) continue;
      for (std::size_t c = 0; c < s.cols(); ++c) {
        const double diff = static_cast<double>(s(r, c)) - t(r, c);
        sq += diff * diff;
        if (dhidden)
          (*dhidden)[l](r, c) =
              static_cast<T>(2.0 * diff * norm / static_cast<double>(layers));
      }
    }
    total += sq * norm;
  }
  return total / static_cast<double>(layers);
}

struct LossParts {
  double loss = 0.0;
  double task = 0.0;
  double distill = 0.0;
};

template <typename T>
LossParts evaluate_loss(const BasicModel<T>& model, const Batch& batch,
                        const LossSpec& spec, BasicModel<T>* grads) {
  const EncoderConfig& cfg = model.config;
  validate_batch(batch, cfg);
  require_labels(batch, spec.kind, cfg);
  require_teacher(batch, spec, cfg);
  const bool distill = spec.kind == LossKind::kd_composite;
  const double inv_batch = 1.0 / static_cast<double>(batch.size());
  LossParts parts;
  for (std::size_t b = 0; b < batch.size(); ++b) {
    const auto& ids = batch.token_ids[b];
    const auto& mask = batch.mask[b];
    std::vector<Matrix<T>> hidden;
    std::optional<ExampleCache<T>> cache;
    if (grads) cache.emplace();
    Matrix<T> logits = forward_example<T>(model, ids, mask, &hidden, nullptr,
                                          cache ? &*cache : nullptr);
    Matrix<T> dlogits(1, cfg.num_outputs);
    const double task =
        example_task_loss(logits, batch, b, grads ? &dlogits : nullptr);
    parts.task += task * inv_batch;
    std::vector<Matrix<T>> dhidden;
    if (distill) {
      const double kd = example_distill_loss(hidden, *spec.teacher, mask, b,
                                             grads ? &dhidden : nullptr);
      parts.distill += kd * inv_batch;
      for (auto& m : dhidden) {
        for (auto& v : m.values())
          v = static_cast<T>(v * spec.kd_weight * inv_batch);
      }
    }
    if (grads) {
      for (auto& v : dlogits.values()) v = static_cast<T>(v * inv_batch);
      backward_example(model, *cache, ids, dlogits, dhidden, *grads);
    }
  }
  parts.loss = parts.task + (distill ? spec.kd_weight * parts.distill : 0.0);
  if (!std::isfinite(parts.loss)) throw NumericError("loss is not finite");
  return parts;
}

template <typename T>
void fill_zero_shapes(BasicModel<T>& m, const EncoderConfig& cfg) {
  const std::size_t h = cfg.hidden_size, f = cfg.ffn_size;
  m.config = cfg;
  m.token_embedding = Matrix<T>(cfg.vocab_size, h);
  m.position_embedding = Matrix<T>(cfg.max_seq_len, h);
  m.layers.assign(cfg.num_layers, {});
  for (auto& l : m.layers) {
    l.wq = l.wk = l.wv = l.wo = Matrix<T>(h, h);
    l.bq = l.bk = l.bv = l.bo = Matrix<T>(1, h);
    l.ln1_gain = l.ln1_bias = l.ln2_gain = l.ln2_bias = Matrix<T>(1, h);
    l.w1 = Matrix<T>(h, f);
    l.b1 = Matrix<T>(1, f);
    l.w2 = Matrix<T>(f, h);
    l.b2 = Matrix<T>(1, h);
  }
  m.head_weight = Matrix<T>(h, cfg.num_outputs);
  m.head_bias = Matrix<T>(1, cfg.num_outputs);
}

}  // namespace

void EncoderConfig::validate() const {
  auto need = [](std::size_t v, const char* what) {
    if (v < 1) throw ConfigError(std::string(what) + " must be >= 1");
  };
  need(num_layers, "num_layers");
  need(hidden_size, "hidden_size");
  need(num_heads, "num_heads");
  need(ffn_size, "ffn_size");
  need(max_seq_len, "max_seq_len");
  need(vocab_size, "vocab_size");
  need(num_outputs, "num_outputs");
  if (hidden_size % num_heads != 0)
    throw ConfigError("hidden_size " + std::to_string(hidden_size) +
                      " is not divisible by num_heads " +
                      std::to_string(num_heads));
}

EncoderConfig EncoderConfig::bert_base_shape() {
  EncoderConfig c;
  c.num_layers = 12;
  c.hidden_size = 768;
  c.num_heads = 12;
  c.ffn_size = 3072;
  c.max_seq_len = 512;
  c.vocab_size = 30522;
  c.num_outputs = 2;
  return c;
}

template <typename T>
BasicModel<T> BasicModel<T>::zeros(const EncoderConfig& config) {
  config.validate();
  BasicModel<T> m;
  fill_zero_shapes(m, config);
  return m;
}

template struct BasicModel<float>;
template struct BasicModel<double>;

template <typename T>
std::vector<NamedTensor<Matrix<T>>> named_tensors(BasicModel<T>& model) {
  std::vector<NamedTensor<Matrix<T>>> out;
  for_each_tensor(model, [&](std::string name, Matrix<T>& t) {
    out.push_back({std::move(name), &t});
  });
  return out;
}

template <typename T>
std::vector<NamedTensor<const Matrix<T>>> named_tensors(
    const BasicModel<T>& model) {
  std::vector<NamedTensor<const Matrix<T>>> out;
  for_each_tensor(model, [&](std::string name, const Matrix<T>& t) {
    out.push_back({std::move(name), &t});
  });
  return out;
}

template std::vector<NamedTensor<Matrix<float>>> named_tensors(
    BasicModel<float>&);
template std::vector<NamedTensor<Matrix<double>>> named_tensors(
    BasicModel<double>&);
template std::vector<NamedTensor<const Matrix<float>>> named_tensors(
    const BasicModel<float>&);
template std::vector<NamedTensor<const Matrix<double>>> named_tensors(
    const BasicModel<double>&);

std::array<std::string, 6> prunable_tensor_names(std::size_t layer) {
  const std::string p = "layers." + std::to_string(layer) + ".";
  return {p + "attn.wq", p + "attn.wk", p + "attn.wv",
          p + "attn.wo", p + "ffn.w1",  p + "ffn.w2"};
}

bool is_prunable_tensor(std::string_view name) {
  if (!name.starts_with("layers.")) return false;
  for (std::string_view suffix :
       {".attn.wq", ".attn.wk", ".attn.wv", ".attn.wo", ".ffn.w1", ".ffn.w2"}) {
    if (name.ends_with(suffix)) return true;
  }
  return false;
}

std::size_t prunable_layer_size(const EncoderConfig& config) {
  const std::size_t h = config.hidden_size;
  return 4 * h * h + 2 * h * config.ffn_size;
}

ModelCheckpoint init_model(const EncoderConfig& config, std::uint64_t seed) {
  ModelCheckpoint m = ModelCheckpoint::zeros(config);
  Rng rng(seed);
  auto fill = [&rng](DenseMatrix& t, double bound) {
    for (auto& v : t.values()) v = static_cast<float>(rng.uniform(-bound, bound));
  };
  fill(m.token_embedding, 1.0);
  fill(m.position_embedding, 1.0);
  for (auto& l : m.layers) {
    const double h_bound = 1.0 / std::sqrt(static_cast<double>(config.hidden_size));
    const double f_bound = 1.0 / std::sqrt(static_cast<double>(config.ffn_size));
    fill(l.wq, h_bound);
    fill(l.wk, h_bound);
    fill(l.wv, h_bound);
    fill(l.wo, h_bound);
    fill(l.w1, h_bound);
    fill(l.w2, f_bound);
    for (auto& v : l.ln1_gain.values()) v = 1.0f;
    for (auto& v : l.ln2_gain.values()) v = 1.0f;
  }
  fill(m.head_weight, 1.0 / std::sqrt(static_cast<double>(config.hidden_size)));
  return m;
}

void validate_model(const ModelCheckpoint& model) {
  try {
    model.config.validate();
  } catch (const ConfigError& e) {
    throw FormatError(std::string("invalid encoder config: ") + e.what());
  }
  if (model.layers.size() != model.config.num_layers)
    throw FormatError("layer count " + std::to_string(model.layers.size()) +
                      " does not match config num_layers " +
                      std::to_string(model.config.num_layers));
  ModelCheckpoint reference = ModelCheckpoint::zeros(model.config);
  auto expected = named_tensors(reference);
  auto actual = named_tensors(model);
  for (std::size_t i = 0; i < actual.size(); ++i) {
    const auto& t = *actual[i].tensor;
    const auto& e = *expected[i].tensor;
    if (t.rows() != e.rows() || t.cols() != e.cols())
      throw FormatError("tensor " + actual[i].name + " has shape " +
                        t.shape_string() + ", expected " + e.shape_string());
    if (!t.all_finite())
      throw FormatError("tensor " + actual[i].name + " has non-finite values");
  }
}

BasicModel<double> widen(const ModelCheckpoint& model) {
  BasicModel<double> out = BasicModel<double>::zeros(model.config);
  auto src = named_tensors(model);
  auto dst = named_tensors(out);
  for (std::size_t i = 0; i < src.size(); ++i)
    *dst[i].tensor = matrix_cast<double>(*src[i].tensor);
  return out;
}

void validate_batch(const Batch& batch, const EncoderConfig& config) {
  if (batch.mask.size() != batch.token_ids.size())
    throw InputError("mask has " + std::to_string(batch.mask.size()) +
                     " rows for " + std::to_string(batch.token_ids.size()) +
                     " examples");
  const std::size_t seq =
      batch.token_ids.empty() ? 0 : batch.token_ids.front().size();
  for (std::size_t b = 0; b < batch.size(); ++b) {
    const auto& ids = batch.token_ids[b];
    const auto& mask = batch.mask[b];
    if (ids.size() != seq) throw InputError("token id rows are ragged");
    if (mask.size() != ids.size())
      throw InputError("mask shape does not match token ids in example " +
                       std::to_string(b));
    if (ids.empty() || ids.size() > config.max_seq_len)
      throw InputError("sequence length " + std::to_string(ids.size()) +
                       " outside [1, " + std::to_string(config.max_seq_len) +
                       "]");
    if (!mask[0])
      throw InputError("first position of example " + std::to_string(b) +
                       " is padding");
    for (auto id : ids) {
      if (id < 0 || static_cast<std::size_t>(id) >= config.vocab_size)
        throw InputError("token id " + std::to_string(id) +
                         " out of range for vocab size " +
                         std::to_string(config.vocab_size));
    }
  }
  const std::size_t labels = std::visit([](const auto& v) { return v.size(); },
                                        batch.labels);
  if (labels != 0 && labels != batch.size())
    throw InputError("label count " + std::to_string(labels) +
                     " does not match batch size " +
                     std::to_string(batch.size()));
}

ForwardOutput forward(const ModelCheckpoint& model, const Batch& batch,
                      bool keep_attention) {
  return run_forward<float>(model, batch, keep_attention);
}

ForwardOutput forward(const SparseModel& model, const Batch& batch) {
  return run_forward<float>(model, batch, false);
}

void apply_masks(ModelCheckpoint& model, const PruneMask& masks) {
  if (masks.empty()) return;
  auto tensors = named_tensors(model);
  for (const auto& [name, mask] : masks) {
    auto it = std::find_if(tensors.begin(), tensors.end(),
                           [&](const auto& t) { return t.name == name; });
    if (it == tensors.end())
      throw ConfigError("mask names unknown tensor " + name);
    DenseMatrix& t = *it->tensor;
    if (t.rows() != mask.rows || t.cols() != mask.cols ||
        mask.keep.size() != t.size())
      throw DimensionError("mask for " + name + " has shape " +
                           std::to_string(mask.rows) + "x" +
                           std::to_string(mask.cols) + ", tensor is " +
                           t.shape_string());
    auto v = t.values();
    for (std::size_t i = 0; i < v.size(); ++i) {
      if (!mask.keep[i]) v[i] = 0.0f;
    }
  }
}

ForwardOutput masked_forward(const ModelCheckpoint& model,
                             const PruneMask& masks, const Batch& batch) {
  if (masks.empty()) return forward(model, batch);
  ModelCheckpoint pruned = model;
  apply_masks(pruned, masks);
  return forward(pruned, batch);
}

LossKind parse_loss_kind(std::string_view name) {
  if (name == "cross_entropy") return LossKind::cross_entropy;
  if (name == "mse") return LossKind::mse;
  if (name == "kd_composite") return LossKind::kd_composite;
  throw ConfigError("unknown loss kind '" + std::string(name) + "'");
}

std::string_view to_string(LossKind kind) {
  switch (kind) {
    case LossKind::cross_entropy:
      return "cross_entropy";
    case LossKind::mse:
      return "mse";
    case LossKind::kd_composite:
      return "kd_composite";
  }
  return "unknown";
}

Gradients backward(const ModelCheckpoint& model, const Batch& batch,
                   const LossSpec& spec) {
  Gradients g;
  g.tensors = ModelCheckpoint::zeros(model.config);
  const LossParts parts = evaluate_loss(model, batch, spec, &g.tensors);
  g.loss = parts.loss;
  g.task_loss = parts.task;
  g.distill_loss = parts.distill;
  return g;
}

double compute_loss(const ModelCheckpoint& model, const Batch& batch,
                    const LossSpec& spec) {
  return evaluate_loss<float>(model, batch, spec, nullptr).loss;
}

double reference_loss(const ModelCheckpoint& model, const Batch& batch,
                      const LossSpec& spec) {
  const BasicModel<double> wide = widen(model);
  return evaluate_loss<double>(wide, batch, spec, nullptr).loss;
}

SparseModel to_sparse(const ModelCheckpoint& model) {
  SparseModel s;
  s.config = model.config;
  s.token_embedding = model.token_embedding;
  s.position_embedding = model.position_embedding;
  s.head_weight = model.head_weight;
  s.head_bias = model.head_bias;
  for (const auto& l : model.layers) {
    SparseLayerWeights sl;
    sl.wq = to_csr(l.wq);
    sl.wk = to_csr(l.wk);
    sl.wv = to_csr(l.wv);
    sl.wo = to_csr(l.wo);
    sl.w1 = to_csr(l.w1);
    sl.w2 = to_csr(l.w2);
    sl.bq = l.bq;
    sl.bk = l.bk;
    sl.bv = l.bv;
    sl.bo = l.bo;
    sl.ln1_gain = l.ln1_gain;
    sl.ln1_bias = l.ln1_bias;
    sl.b1 = l.b1;
    sl.b2 = l.b2;
    sl.ln2_gain = l.ln2_gain;
    sl.ln2_bias = l.ln2_bias;
    s.layers.push_back(std::move(sl));
  }
  return s;
}

std::vector<int> argmax_rows(const DenseMatrix& logits) {
  std::vector<int> out(logits.rows());
  for (std::size_t r = 0; r < logits.rows(); ++r) {
    const auto row = logits.row(r);
    out[r] = static_cast<int>(std::max_element(row.begin(), row.end()) -
                              row.begin());
  }
  return out;
}

}  // namespace prunesearch
