// Copyright 2026 The prunesearch Authors.
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <cmath>

#include "prunesearch/errors.hpp"
#include "prunesearch/pruning.hpp"
#include "test_util.hpp"

namespace prunesearch {
namespace {

using testing::random_batch;
using testing::tiny_config;
using Vec = std::vector<double>;
using Mat = std::vector<Vec>;

// ---- Straight-line double-precision oracle, written independently of the
// library's templated forward pass. ----

Mat to_mat(const DenseMatrix& m) {
  Mat out(m.rows(), Vec(m.cols()));
  for (std::size_t i = 0; i < m.rows(); ++i)
    for (std::size_t j = 0; j < m.cols(); ++j) out[i][j] = m(i, j);
  return out;
}

Vec affine(const Vec& x, const DenseMatrix& w, const DenseMatrix& b) {
  Vec y(w.cols());
  for (std::size_t j = 0; j < w.cols(); ++j) {
    double s = b(0, j);
    for (std::size_t i = 0; i < x.size(); ++i) s += x[i] * w(i, j);
    y[j] = s;
  }
  return y;
}

Vec norm(const Vec& x, const DenseMatrix& g, const DenseMatrix& b) {
  double mean = 0, var = 0;
  for (double v : x) mean += v;
  mean /= x.size();
  for (double v : x) var += (v - mean) * (v - mean);
  var /= x.size();
  Vec y(x.size());
  for (std::size_t i = 0; i < x.size(); ++i)
    y[i] = (x[i] - mean) / std::sqrt(var + 1e-5) * g(0, i) + b(0, i);
  return y;
}

Vec oracle_logits(const ModelCheckpoint& m, const std::vector<std::int32_t>& ids,
                  const std::vector<std::uint8_t>& mask) {
  const auto& c = m.config;
  const std::size_t n = ids.size(), hdim = c.hidden_size / c.num_heads;
  Mat x(n, Vec(c.hidden_size));
  for (std::size_t t = 0; t < n; ++t)
    for (std::size_t j = 0; j < c.hidden_size; ++j)
      x[t][j] = m.token_embedding(ids[t], j) + m.position_embedding(t, j);
  for (const auto& L : m.layers) {
    Mat q(n), k(n), v(n);
    for (std::size_t t = 0; t < n; ++t) {
      q[t] = affine(x[t], L.wq, L.bq);
      k[t] = affine(x[t], L.wk, L.bk);
      v[t] = affine(x[t], L.wv, L.bv);
    }
    Mat next(n);
    for (std::size_t t = 0; t < n; ++t) {
      Vec ctx(c.hidden_size, 0.0);
      for (std::size_t h = 0; h < c.num_heads; ++h) {
        Vec w(n, 0.0);
        double mx = -1e300, z = 0;
        for (std::size_t s = 0; s < n; ++s) {
          if (!mask[s]) continue;
          double dot = 0;
          for (std::size_t d = 0; d < hdim; ++d)
            dot += q[t][h * hdim + d] * k[s][h * hdim + d];
          w[s] = dot / std::sqrt(double(hdim));
          mx = std::max(mx, w[s]);
        }
        for (std::size_t s = 0; s < n; ++s)
          if (mask[s]) z += (w[s] = std::exp(w[s] - mx));
        for (std::size_t s = 0; s < n; ++s)
          if (mask[s])
            for (std::size_t d = 0; d < hdim; ++d)
              ctx[h * hdim + d] += w[s] / z * v[s][h * hdim + d];
      }
      Vec a = affine(ctx, L.wo, L.bo);
      for (std::size_t j = 0; j < a.size(); ++j) a[j] += x[t][j];
      const Vec y1 = norm(a, L.ln1_gain, L.ln1_bias);
      Vec f = affine(y1, L.w1, L.b1);
      for (double& u : f) u = 0.5 * u * (1 + std::erf(u / std::sqrt(2.0)));
      Vec o = affine(f, L.w2, L.b2);
      for (std::size_t j = 0; j < o.size(); ++j) o[j] += y1[j];
      next[t] = norm(o, L.ln2_gain, L.ln2_bias);
    }
    x = next;
  }
  return affine(x[0], m.head_weight, m.head_bias);
}

ModelCheckpoint randomized(const EncoderConfig& c, std::uint64_t seed) {
  ModelCheckpoint m = init_model(c, seed);
  Rng rng(seed + 100);
  // Non-trivial biases and norm parameters so every path is exercised.
  for (auto& [name, t] : named_tensors(m))
    if (t->rows() == 1)
      for (float& v : t->values()) v = static_cast<float>(rng.uniform(-0.5, 0.5) + (name.find("gain") != std::string::npos ? 1.0 : 0.0));
  return m;
}

TEST(Forward, SingleTokenOneLayerMatchesScalarOracle) {
  EncoderConfig c;
  c.num_layers = 1;
  c.hidden_size = 4;
  c.num_heads = 1;
  c.ffn_size = 4;
  c.max_seq_len = 1;
  c.vocab_size = 3;
  c.num_outputs = 2;
  ModelCheckpoint m = ModelCheckpoint::zeros(c);
  // Hand-set weights: v and o are identities, the FFN is a scaled identity.
  auto& L = m.layers[0];
  L.wv = DenseMatrix::identity(4);
  L.wo = DenseMatrix::identity(4);
  L.w1 = DenseMatrix::identity(4);
  for (float& v : L.w2.values()) v = 0.0f;
  for (std::size_t i = 0; i < 4; ++i) L.w2(i, i) = 0.5f;
  L.ln1_gain = DenseMatrix(1, 4, 1.0f);
  L.ln2_gain = DenseMatrix(1, 4, 1.0f);
  m.token_embedding = DenseMatrix::from_rows({{0, 0, 0, 0}, {1, 2, 3, 4}, {0, 0, 0, 0}});
  m.head_weight = DenseMatrix::from_rows({{1, 0}, {0, 1}, {1, 0}, {0, 1}});
  m.head_bias = DenseMatrix::from_rows({{0.25f, -0.25f}});
  Batch b;
  b.token_ids = {{1}};
  b.mask = {{1}};
  // Hand arithmetic: x=(1,2,3,4), attention of a single token returns v = x,
  // so a = 2x; LN gives z = (2x - 5) / sqrt(5 + 1e-5).
  double z[4], f[4], y[4];
  const double s = std::sqrt(5.0 + 1e-5);
  for (int i = 0; i < 4; ++i) z[i] = (2.0 * (i + 1) - 5.0) / s;
  for (int i = 0; i < 4; ++i)
    f[i] = z[i] + 0.5 * (0.5 * z[i] * (1.0 + std::erf(z[i] / std::sqrt(2.0))));
  double mean = (f[0] + f[1] + f[2] + f[3]) / 4, var = 0;
  for (int i = 0; i < 4; ++i) var += (f[i] - mean) * (f[i] - mean);
  var /= 4;
  for (int i = 0; i < 4; ++i) y[i] = (f[i] - mean) / std::sqrt(var + 1e-5);
  const double l0 = y[0] + y[2] + 0.25, l1 = y[1] + y[3] - 0.25;
  const ForwardOutput out = forward(m, b);
  EXPECT_NEAR(out.logits(0, 0), l0, 1e-5);
  EXPECT_NEAR(out.logits(0, 1), l1, 1e-5);
  const Vec oracle = oracle_logits(m, b.token_ids[0], b.mask[0]);
  EXPECT_NEAR(oracle[0], l0, 1e-9);
}

TEST(Forward, MatchesOracleOnRandomModels) {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const EncoderConfig c = tiny_config();
    const ModelCheckpoint m = randomized(c, seed);
    Rng rng(seed);
    const Batch b = random_batch(c, 4, rng);
    const ForwardOutput out = forward(m, b);
    for (std::size_t i = 0; i < b.size(); ++i) {
      const Vec want = oracle_logits(m, b.token_ids[i], b.mask[i]);
      for (std::size_t o = 0; o < c.num_outputs; ++o)
        EXPECT_NEAR(out.logits(i, o), want[o], 1e-5);
    }
  }
}

TEST(Forward, AttentionRowsAreDistributions) {
  const EncoderConfig c = tiny_config();
  const ModelCheckpoint m = randomized(c, 3);
  Rng rng(3);
  const Batch b = random_batch(c, 3, rng);
  const ForwardOutput out = forward(m, b, true);
  ASSERT_EQ(out.attention.size(), c.num_layers);
  for (const auto& layer : out.attention)
    for (std::size_t e = 0; e < b.size(); ++e)
      for (const auto& head : layer[e])
        for (std::size_t r = 0; r < head.rows(); ++r) {
          double sum = 0;
          for (std::size_t s = 0; s < head.cols(); ++s) {
            sum += head(r, s);
            if (!b.mask[e][s]) EXPECT_EQ(head(r, s), 0.0f);
          }
          EXPECT_NEAR(sum, 1.0, 1e-5);
        }
}

TEST(Forward, ZeroQueryKeyGivesUniformAttention) {
  const EncoderConfig c = tiny_config();
  ModelCheckpoint m = randomized(c, 4);
  for (auto& L : m.layers) {
    for (auto* t : {&L.wq, &L.wk, &L.bq, &L.bk})
      for (float& v : t->values()) v = 0.0f;
  }
  Rng rng(4);
  const Batch b = random_batch(c, 2, rng);
  const ForwardOutput out = forward(m, b, true);
  for (std::size_t e = 0; e < b.size(); ++e) {
    double real = 0;
    for (auto v : b.mask[e]) real += v;
    for (const auto& head : out.attention[0][e])
      for (std::size_t r = 0; r < head.rows(); ++r)
        for (std::size_t s = 0; s < head.cols(); ++s)
          EXPECT_NEAR(head(r, s), b.mask[e][s] ? 1.0 / real : 0.0, 1e-7);
  }
}

TEST(Forward, PaddingDoesNotChangeOutputs) {
  const EncoderConfig c = tiny_config();
  const ModelCheckpoint m = randomized(c, 5);
  Batch shortb;
  shortb.token_ids = {{0, 4, 5}};
  shortb.mask = {{1, 1, 1}};
  Batch padded;
  padded.token_ids = {{0, 4, 5, 1, 1, 1}};
  padded.mask = {{1, 1, 1, 0, 0, 0}};
  const auto a = forward(m, shortb).logits, p = forward(m, padded).logits;
  for (std::size_t o = 0; o < c.num_outputs; ++o) EXPECT_NEAR(a(0, o), p(0, o), 1e-6);
}

TEST(Forward, DeterministicAndLayerNormNormalized) {
  const EncoderConfig c = tiny_config();
  const ModelCheckpoint m = init_model(c, 6);  // unit gains, zero biases
  Rng rng(6);
  const Batch b = random_batch(c, 3, rng);
  const ForwardOutput a = forward(m, b), again = forward(m, b);
  EXPECT_EQ(a.logits, again.logits);
  for (const auto& layer : a.hidden_states)
    for (const auto& h : layer)
      for (std::size_t r = 0; r < h.rows(); ++r) {
        double mean = 0, var = 0;
        for (float v : h.row(r)) mean += v;
        mean /= h.cols();
        for (float v : h.row(r)) var += (v - mean) * (v - mean);
        var /= h.cols();
        EXPECT_NEAR(mean, 0.0, 1e-4);
        EXPECT_NEAR(var, 1.0, 1e-3);
      }
}

TEST(Forward, InputValidation) {
  const EncoderConfig c = tiny_config();
  const ModelCheckpoint m = init_model(c, 7);
  Batch b;
  b.token_ids = {{0, static_cast<std::int32_t>(c.vocab_size)}};
  b.mask = {{1, 1}};
  EXPECT_THROW(forward(m, b), InputError);
  b.token_ids = {{0, -1}};
  EXPECT_THROW(forward(m, b), InputError);
  b.token_ids = {{0, 2}};
  b.mask = {{1}};
  EXPECT_THROW(forward(m, b), InputError);
  b.mask = {{0, 1}};
  EXPECT_THROW(forward(m, b), InputError);
  b.mask = {{1, 1}};
  b.token_ids = {std::vector<std::int32_t>(c.max_seq_len + 1, 2)};
  b.mask = {std::vector<std::uint8_t>(c.max_seq_len + 1, 1)};
  EXPECT_THROW(forward(m, b), InputError);
}

TEST(SparseForward, MatchesDense) {
  const EncoderConfig c = tiny_config();
  PruningStrategy s;
  s.per_layer_ratios = {0.5, 0.9};
  const ModelCheckpoint m = apply_strategy(randomized(c, 8), s);
  Rng rng(8);
  const Batch b = random_batch(c, 4, rng);
  const auto dense = forward(m, b).logits;
  const auto sparse = forward(to_sparse(m), b).logits;
  for (std::size_t i = 0; i < dense.size(); ++i)
    EXPECT_NEAR(dense.values()[i], sparse.values()[i], 1e-5);
}

TEST(MaskedForward, OnesMaskIsBitExact) {
  const EncoderConfig c = tiny_config();
  const ModelCheckpoint m = randomized(c, 9);
  Rng rng(9);
  const Batch b = random_batch(c, 3, rng);
  PruneMask ones;
  for (const auto& [name, t] : named_tensors(m))
    if (is_prunable_tensor(name)) ones[name] = TensorMask::ones(t->rows(), t->cols());
  EXPECT_EQ(masked_forward(m, ones, b).logits, forward(m, b).logits);
}

TEST(MaskedForward, StrategyMasksEqualApplyThenForward) {
  const EncoderConfig c = tiny_config();
  const ModelCheckpoint m = randomized(c, 10);
  const PruningStrategy s = uniform_strategy(2, 0.5);
  Rng rng(10);
  const Batch b = random_batch(c, 3, rng);
  const auto a = masked_forward(m, strategy_masks(m, s), b).logits;
  const auto r = forward(apply_strategy(m, s), b).logits;
  for (std::size_t i = 0; i < a.size(); ++i)
    EXPECT_NEAR(a.values()[i], r.values()[i], 1e-6);
}

TEST(MaskedForward, ZeroFfnDownLeavesOnlyBias) {
  const EncoderConfig c = tiny_config();
  ModelCheckpoint m = randomized(c, 11);
  PruneMask masks;
  for (std::size_t l = 0; l < c.num_layers; ++l) {
    const auto name = "layers." + std::to_string(l) + ".ffn.w2";
    masks[name] = {c.ffn_size, c.hidden_size,
                   std::vector<std::uint8_t>(c.ffn_size * c.hidden_size, 0)};
  }
  Rng rng(11);
  const Batch b = random_batch(c, 2, rng);
  const auto before = masked_forward(m, masks, b).logits;
  // With W2 masked, the up-projection cannot influence anything.
  for (auto& L : m.layers)
    for (float& v : L.w1.values()) v = -v * 3.0f;
  EXPECT_EQ(masked_forward(m, masks, b).logits, before);
}

TEST(MaskedForward, BadMasks) {
  const EncoderConfig c = tiny_config();
  const ModelCheckpoint m = init_model(c, 12);
  Rng rng(12);
  const Batch b = random_batch(c, 1, rng);
  PruneMask wrong_shape{{"layers.0.attn.wq", TensorMask::ones(2, 2)}};
  EXPECT_THROW(masked_forward(m, wrong_shape, b), DimensionError);
  PruneMask unknown{{"layers.9.attn.wq", TensorMask::ones(8, 8)}};
  EXPECT_THROW(masked_forward(m, unknown, b), ConfigError);
}

// ---- Gradients ----

struct GradCheckStats {
  std::size_t checked = 0;
  std::size_t failed = 0;
  double worst = 0.0;
  std::string worst_name;
};

GradCheckStats gradient_check(const ModelCheckpoint& model, const Batch& batch,
                              const LossSpec& spec) {
  const Gradients g = backward(model, batch, spec);
  ModelCheckpoint probe = model;
  auto params = named_tensors(probe);
  const auto grads = named_tensors(g.tensors);
  GradCheckStats st;
  for (std::size_t p = 0; p < params.size(); ++p) {
    auto w = params[p].tensor->values();
    const auto gv = grads[p].tensor->values();
    for (std::size_t i = 0; i < w.size(); ++i) {
      const float orig = w[i];
      const float up = orig + 1e-3f, down = orig - 1e-3f;
      w[i] = up;
      const double lu = reference_loss(probe, batch, spec);
      w[i] = down;
      const double ld = reference_loss(probe, batch, spec);
      w[i] = orig;
      const double numeric = (lu - ld) / (static_cast<double>(up) - down);
      const double analytic = gv[i];
      if (std::max(std::fabs(analytic), std::fabs(numeric)) <= 1e-4) continue;
      ++st.checked;
      const double rel = std::fabs(analytic - numeric) /
                         std::max(std::fabs(analytic), std::fabs(numeric));
      if (rel > 2e-2) ++st.failed;
      if (rel > st.worst) {
        st.worst = rel;
        st.worst_name = params[p].name + "[" + std::to_string(i) + "]";
      }
    }
  }
  return st;
}

TEST(Backward, CrossEntropyMatchesFiniteDifferences) {
  const EncoderConfig c = tiny_config();
  const ModelCheckpoint m = randomized(c, 13);
  Rng rng(13);
  const Batch b = random_batch(c, 3, rng);
  const auto st = gradient_check(m, b, {LossKind::cross_entropy});
  EXPECT_GT(st.checked, 500u);
  EXPECT_EQ(st.failed, 0u) << "worst " << st.worst << " at " << st.worst_name;
}

TEST(Backward, MseMatchesFiniteDifferences) {
  EncoderConfig c = tiny_config();
  c.num_outputs = 1;
  const ModelCheckpoint m = randomized(c, 14);
  Rng rng(14);
  const Batch b = random_batch(c, 3, rng, true);
  const auto st = gradient_check(m, b, {LossKind::mse});
  EXPECT_EQ(st.failed, 0u) << "worst " << st.worst << " at " << st.worst_name;
}

TEST(Backward, DistillationMatchesFiniteDifferences) {
  const EncoderConfig c = tiny_config();
  const ModelCheckpoint m = randomized(c, 15);
  const ModelCheckpoint teacher = randomized(c, 16);
  Rng rng(15);
  const Batch b = random_batch(c, 3, rng);
  const ForwardOutput t = forward(teacher, b);
  const auto st = gradient_check(m, b, {LossKind::kd_composite, 0.7, &t});
  EXPECT_EQ(st.failed, 0u) << "worst " << st.worst << " at " << st.worst_name;
}

TEST(Backward, BlockedPathwayHasZeroGradient) {
  const EncoderConfig c = tiny_config();
  ModelCheckpoint m = randomized(c, 17);
  for (float& v : m.layers[1].w2.values()) v = 0.0f;
  Rng rng(17);
  const Batch b = random_batch(c, 3, rng);
  const Gradients g = backward(m, b, {LossKind::cross_entropy});
  for (float v : g.tensors.layers[1].w1.values()) EXPECT_EQ(v, 0.0f);
  for (float v : g.tensors.layers[1].b1.values()) EXPECT_EQ(v, 0.0f);
}

TEST(Loss, DoublingCorrectMarginsLowersCrossEntropy) {
  const EncoderConfig c = tiny_config();
  ModelCheckpoint m = randomized(c, 18);
  Rng rng(18);
  Batch b = random_batch(c, 4, rng);
  b.labels = argmax_rows(forward(m, b).logits);
  const double before = compute_loss(m, b, {LossKind::cross_entropy});
  for (float& v : m.head_weight.values()) v *= 2.0f;
  for (float& v : m.head_bias.values()) v *= 2.0f;
  EXPECT_LT(compute_loss(m, b, {LossKind::cross_entropy}), before);
}

TEST(Loss, DistillationTermIsLayerAveragedTokenMse) {
  const EncoderConfig c = tiny_config();
  const ModelCheckpoint s = randomized(c, 19), t = randomized(c, 20);
  Rng rng(19);
  const Batch b = random_batch(c, 3, rng);
  const ForwardOutput so = forward(s, b), to = forward(t, b);
  double expect = 0;
  for (std::size_t e = 0; e < b.size(); ++e) {
    double per_example = 0;
    for (std::size_t l = 0; l < c.num_layers; ++l) {
      double sq = 0, n = 0;
      for (std::size_t r = 0; r < b.mask[e].size(); ++r) {
        if (!b.mask[e][r]) continue;
        for (std::size_t j = 0; j < c.hidden_size; ++j) {
          const double d = double(so.hidden_states[l][e](r, j)) - to.hidden_states[l][e](r, j);
          sq += d * d;
          n += 1;
        }
      }
      per_example += sq / n;
    }
    expect += per_example / c.num_layers;
  }
  expect /= b.size();
  const Gradients g = backward(s, b, {LossKind::kd_composite, 2.0, &to});
  EXPECT_NEAR(g.distill_loss, expect, 1e-6 * std::max(1.0, expect));
  EXPECT_NEAR(g.loss, g.task_loss + 2.0 * g.distill_loss, 1e-9);
  const ForwardOutput self = forward(s, b);
  EXPECT_EQ(backward(s, b, {LossKind::kd_composite, 1.0, &self}).distill_loss, 0.0);
}

TEST(Loss, ParseAndRequirements) {
  EXPECT_EQ(parse_loss_kind("mse"), LossKind::mse);
  EXPECT_THROW(parse_loss_kind("hinge"), ConfigError);
  const EncoderConfig c = tiny_config();
  const ModelCheckpoint m = init_model(c, 21);
  Rng rng(21);
  const Batch cls = random_batch(c, 2, rng);
  const Batch reg = random_batch(c, 2, rng, true);
  EXPECT_THROW(compute_loss(m, reg, {LossKind::cross_entropy}), Error);
  EXPECT_THROW(compute_loss(m, cls, {LossKind::mse}), Error);
  EXPECT_THROW(compute_loss(m, cls, {LossKind::kd_composite}), ConfigError);
}

TEST(Model, ValidateNamesOffendingTensor) {
  ModelCheckpoint m = init_model(tiny_config(), 22);
  m.layers[1].w1 = DenseMatrix(3, 3);
  try {
    validate_model(m);
    FAIL();
  } catch (const FormatError& e) {
    EXPECT_NE(std::string(e.what()).find("layers.1.ffn.w1"), std::string::npos);
  }
  m = init_model(tiny_config(), 22);
  m.head_bias(0, 0) = std::nanf("");
  EXPECT_THROW(validate_model(m), FormatError);
}

TEST(Model, ConfigValidation) {
  EncoderConfig c = tiny_config();
  c.num_heads = 3;
  EXPECT_THROW(c.validate(), ConfigError);
  c = tiny_config();
  c.num_layers = 0;
  EXPECT_THROW(c.validate(), ConfigError);
  EXPECT_NO_THROW(EncoderConfig::bert_base_shape().validate());
}

}  // namespace
}  // namespace prunesearch
