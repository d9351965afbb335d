// Copyright 2026 The unilog Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//    http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Scalar re-implementation of the decoder used to drive the coder. Encoder
// and decoder must agree bit for bit, on any machine, so this file avoids
// library math beyond IEEE basic operations and sqrt, fixes every summation
// order, and is compiled without floating-point contraction.

#include <algorithm>
#include <cmath>
#include <limits>

#include "unilog/compression.hpp"
#include "unilog/tokenizer.hpp"

namespace unilog::compression {

using tokenizer::SpecialIds;

double portable_exp(double x) {
  if (std::isnan(x)) return x;
  if (x > 709.0) return std::numeric_limits<double>::infinity();
  if (x < -745.0) return 0.0;
  // x = k ln2 + r with |r| <= ln2/2, ln2 split in two for an exact k*hi.
  constexpr double kLog2e = 1.4426950408889634;
  constexpr double kLn2Hi = 6.93147180369123816490e-01;
  constexpr double kLn2Lo = 1.90821492927058770002e-10;
  const double k = std::floor(x * kLog2e + 0.5);
  const double r = (x - k * kLn2Hi) - k * kLn2Lo;
  // Taylor series to degree 13; the truncation error is below 1e-17 here.
  double p = 1.0 / 6227020800.0;
  p = p * r + 1.0 / 479001600.0;
  p = p * r + 1.0 / 39916800.0;
  p = p * r + 1.0 / 3628800.0;
  p = p * r + 1.0 / 362880.0;
  p = p * r + 1.0 / 40320.0;
  p = p * r + 1.0 / 5040.0;
  p = p * r + 1.0 / 720.0;
  p = p * r + 1.0 / 120.0;
  p = p * r + 1.0 / 24.0;
  p = p * r + 1.0 / 6.0;
  p = p * r + 0.5;
  p = p * r + 1.0;
  p = p * r + 1.0;
  return std::ldexp(p, static_cast<int>(k));
}

namespace {

using Vec = std::vector<double>;
using model::Matrix;

double dot(const double* a, const double* b, std::size_t n) {
  double s0 = 0.0, s1 = 0.0, s2 = 0.0, s3 = 0.0;
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    s0 += a[i] * b[i];
    s1 += a[i + 1] * b[i + 1];
    s2 += a[i + 2] * b[i + 2];
    s3 += a[i + 3] * b[i + 3];
  }
  for (; i < n; ++i) s0 += a[i] * b[i];
  return (s0 + s1) + (s2 + s3);
}

double sum(const double* a, std::size_t n) {
  double s0 = 0.0, s1 = 0.0, s2 = 0.0, s3 = 0.0;
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    s0 += a[i];
    s1 += a[i + 1];
    s2 += a[i + 2];
    s3 += a[i + 3];
  }
  for (; i < n; ++i) s0 += a[i];
  return (s0 + s1) + (s2 + s3);
}

double sigmoid(double z) {
  if (z >= 0) return 1.0 / (1.0 + portable_exp(-z));
  const double e = portable_exp(z);
  return e / (1.0 + e);
}

double tanh_portable(double x) {
  const double a = std::fabs(x);
  const double t = 1.0 - 2.0 / (portable_exp(2.0 * a) + 1.0);
  return x < 0 ? -t : t;
}

// Dense layer y = x W (+ b), with W stored transposed (out x in).
struct Dense {
  std::size_t in = 0;
  std::size_t out = 0;
  Vec wt;
  Vec b;

  static Dense from(const model::Parameter& w, const model::Parameter* bias) {
    Dense d;
    d.in = static_cast<std::size_t>(w.value.rows());
    d.out = static_cast<std::size_t>(w.value.cols());
    d.wt.resize(d.in * d.out);
    for (std::size_t i = 0; i < d.in; ++i)
      for (std::size_t j = 0; j < d.out; ++j) d.wt[j * d.in + i] = w.value(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
    if (bias) d.b.assign(bias->value.data(), bias->value.data() + bias->value.size());
    return d;
  }

  void apply(const double* x, double* y) const {
    for (std::size_t j = 0; j < out; ++j) {
      const double v = dot(x, &wt[j * in], in);
      y[j] = b.empty() ? v : v + b[j];
    }
  }
};

struct Norm {
  Vec g;
  Vec b;

  static Norm from(const model::LayerNormParams& p) {
    const Matrix& g = p.gain->value;
    const Matrix& b = p.bias->value;
    return {Vec(g.data(), g.data() + g.size()), Vec(b.data(), b.data() + b.size())};
  }

  void apply(const double* x, double* y) const {
    const std::size_t n = g.size();
    const double mean = sum(x, n) / static_cast<double>(n);
    Vec c(n);
    for (std::size_t i = 0; i < n; ++i) c[i] = (x[i] - mean) * (x[i] - mean);
    const double var = sum(c.data(), n) / static_cast<double>(n);
    const double inv = 1.0 / std::sqrt(var + 1e-6);
    for (std::size_t i = 0; i < n; ++i) y[i] = (x[i] - mean) * inv * g[i] + b[i];
  }
};

struct Attn {
  Dense q, k, v, o;

  static Attn from(const model::AttentionParams& p) {
    return {Dense::from(*p.wq, nullptr), Dense::from(*p.wk, nullptr), Dense::from(*p.wv, nullptr),
            Dense::from(*p.wo, nullptr)};
  }
};

struct Ffn {
  Dense w, v, out;
  double beta = 1.0;

  static Ffn from(const model::FfnParams& p) {
    return {Dense::from(*p.w, p.b), Dense::from(*p.v, p.c), Dense::from(*p.out, p.out_b), p.beta->value(0, 0)};
  }

  void apply(const double* x, double* y) const {
    Vec g(w.out), l(v.out);
    w.apply(x, g.data());
    v.apply(x, l.data());
    for (std::size_t i = 0; i < g.size(); ++i) g[i] = g[i] * sigmoid(beta * g[i]) * l[i];
    out.apply(g.data(), y);
  }
};

}  // namespace

struct ModelPredictor::Impl {
  std::size_t d = 0;
  std::size_t heads = 0;
  std::size_t dh = 0;
  int n_buckets = 0;
  int window = 0;
  double inv_sqrt = 1.0;
  std::size_t vocab = 0;
  Vec embed;     // vocab x d
  Vec rel_bias;  // buckets x heads

  struct Layer {
    Norm ln_self, ln_cross, ln_ffn;
    Attn self, cross;
    Ffn ffn;
    Vec mem_k, mem_v;  // cross-attention keys/values over the encoder output
    Vec k_cache, v_cache;
  };
  std::vector<Layer> layers;
  std::size_t mem_len = 0;
  Norm dec_final;
  Dense head1, head2;
  std::vector<bool> support;

  std::vector<TokenId> history;
  std::size_t cache_len = 0;
  Vec last_hidden;
  bool have_pmf = false;
  QuantizedPmf pmf;

  // Attention of one query over `n` keys/values. With query_pos >= 0 the
  // relative-position bias of key j is looked up for offset j - query_pos.
  void attend(const double* q, const Vec& keys, const Vec& values, std::size_t n, long query_pos, double* out) const {
    Vec w(n);
    for (std::size_t h = 0; h < heads; ++h) {
      const std::size_t off = h * dh;
      double m = -std::numeric_limits<double>::infinity();
      for (std::size_t j = 0; j < n; ++j) {
        double s = dot(q + off, &keys[j * d + off], dh) * inv_sqrt;
        if (query_pos >= 0) {
          const int bucket = model::relative_bucket(static_cast<int>(static_cast<long>(j) - query_pos), n_buckets);
          s += rel_bias[static_cast<std::size_t>(bucket) * heads + h];
        }
        w[j] = s;
        m = std::max(m, s);
      }
      for (std::size_t j = 0; j < n; ++j) w[j] = portable_exp(w[j] - m);
      const double z = sum(w.data(), n);
      for (std::size_t i = 0; i < dh; ++i) out[off + i] = 0.0;
      for (std::size_t j = 0; j < n; ++j) {
        const double p = w[j] / z;
        for (std::size_t i = 0; i < dh; ++i) out[off + i] += p * values[j * d + off + i];
      }
    }
  }

  void run_encoder(const model::Checkpoint& ckpt) {
    const model::Transformer& m = ckpt.model;
    const std::vector<TokenId> ids{SpecialIds::task_prefix(TaskKind::kCompression)};
    mem_len = ids.size();
    Vec x(mem_len * d);
    for (std::size_t p = 0; p < mem_len; ++p)
      std::copy_n(&embed[static_cast<std::size_t>(ids[p]) * d], d, &x[p * d]);
    Vec a(d), y(d), q(mem_len * d), k(mem_len * d), v(mem_len * d), o(d);
    for (int b = 0; b < ckpt.config.n_blocks; ++b) {
      const model::EncoderBlock& blk = m.encoder_block(b);
      const Norm ln1 = Norm::from(blk.ln_attn), ln2 = Norm::from(blk.ln_ffn);
      const Attn at = Attn::from(blk.self_attn);
      const Ffn ff = Ffn::from(blk.ffn);
      for (std::size_t p = 0; p < mem_len; ++p) {
        ln1.apply(&x[p * d], a.data());
        at.q.apply(a.data(), &q[p * d]);
        at.k.apply(a.data(), &k[p * d]);
        at.v.apply(a.data(), &v[p * d]);
      }
      Vec att(mem_len * d);
      for (std::size_t p = 0; p < mem_len; ++p) attend(&q[p * d], k, v, mem_len, static_cast<long>(p), &att[p * d]);
      for (std::size_t p = 0; p < mem_len; ++p) {
        at.o.apply(&att[p * d], o.data());
        for (std::size_t i = 0; i < d; ++i) x[p * d + i] += o[i];
        ln2.apply(&x[p * d], a.data());
        ff.apply(a.data(), y.data());
        for (std::size_t i = 0; i < d; ++i) x[p * d + i] += y[i];
      }
    }
    const Norm fin = Norm::from(m.encoder_final_norm());
    Vec memory(mem_len * d);
    for (std::size_t p = 0; p < mem_len; ++p) fin.apply(&x[p * d], &memory[p * d]);
    for (Layer& l : layers) {
      l.mem_k.assign(mem_len * d, 0.0);
      l.mem_v.assign(mem_len * d, 0.0);
      for (std::size_t p = 0; p < mem_len; ++p) {
        l.cross.k.apply(&memory[p * d], &l.mem_k[p * d]);
        l.cross.v.apply(&memory[p * d], &l.mem_v[p * d]);
      }
    }
  }

  // Appends one decoder position and leaves its final hidden state in
  // last_hidden.
  void feed(TokenId id) {
    const std::size_t pos = cache_len;
    Vec h(&embed[static_cast<std::size_t>(id) * d], &embed[static_cast<std::size_t>(id) * d] + d);
    Vec a(d), q(d), o(d), y(d);
    for (Layer& l : layers) {
      l.ln_self.apply(h.data(), a.data());
      l.self.q.apply(a.data(), q.data());
      l.self.k.apply(a.data(), &l.k_cache[pos * d]);
      l.self.v.apply(a.data(), &l.v_cache[pos * d]);
      attend(q.data(), l.k_cache, l.v_cache, pos + 1, static_cast<long>(pos), o.data());
      l.self.o.apply(o.data(), y.data());
      for (std::size_t i = 0; i < d; ++i) h[i] += y[i];

      l.ln_cross.apply(h.data(), a.data());
      l.cross.q.apply(a.data(), q.data());
      attend(q.data(), l.mem_k, l.mem_v, mem_len, -1, o.data());
      l.cross.o.apply(o.data(), y.data());
      for (std::size_t i = 0; i < d; ++i) h[i] += y[i];

      l.ln_ffn.apply(h.data(), a.data());
      l.ffn.apply(a.data(), y.data());
      for (std::size_t i = 0; i < d; ++i) h[i] += y[i];
    }
    ++cache_len;
    last_hidden.resize(d);
    dec_final.apply(h.data(), last_hidden.data());
  }

  Vec compute_logits() const {
    Vec z(head1.out), r(d);
    head1.apply(last_hidden.data(), z.data());
    for (double& v : z) v = tanh_portable(v);
    head2.apply(z.data(), r.data());
    for (std::size_t i = 0; i < d; ++i) r[i] += last_hidden[i];
    Vec logits(vocab);
    for (std::size_t t = 0; t < vocab; ++t) logits[t] = dot(r.data(), &embed[t * d], d);
    return logits;
  }

  void restart(std::span<const TokenId> context) {
    cache_len = 0;
    feed(SpecialIds::kBos);
    for (TokenId t : context) feed(t);
    have_pmf = false;
  }
};

ModelPredictor::ModelPredictor(const model::Checkpoint& ckpt, int context_window) : impl_(std::make_unique<Impl>()) {
  const model::ModelConfig& c = ckpt.config;
  Impl& s = *impl_;
  s.window = context_window > 0 ? context_window : c.max_len;
  if (s.window < 8 || s.window > c.max_len) {
    throw UsageError("context window must be in [8, " + std::to_string(c.max_len) + "]");
  }
  s.d = static_cast<std::size_t>(c.d_model);
  s.heads = static_cast<std::size_t>(c.n_heads);
  s.dh = static_cast<std::size_t>(c.d_head);
  s.n_buckets = c.n_rel_buckets;
  s.inv_sqrt = 1.0 / std::sqrt(static_cast<double>(s.dh));
  s.vocab = static_cast<std::size_t>(c.vocab_size);
  const model::Transformer& m = ckpt.model;
  const model::Parameter& e = m.embedding();
  s.embed.assign(e.value.data(), e.value.data() + e.value.size());
  const model::Parameter& rb = m.rel_bias();
  s.rel_bias.assign(rb.value.data(), rb.value.data() + rb.value.size());
  for (int b = 0; b < c.n_blocks; ++b) {
    const model::DecoderBlock& blk = m.decoder_block(b);
    Impl::Layer l;
    l.ln_self = Norm::from(blk.ln_self);
    l.ln_cross = Norm::from(blk.ln_cross);
    l.ln_ffn = Norm::from(blk.ln_ffn);
    l.self = Attn::from(blk.self_attn);
    l.cross = Attn::from(blk.cross_attn);
    l.ffn = Ffn::from(blk.ffn);
    l.k_cache.assign(static_cast<std::size_t>(s.window) * s.d, 0.0);
    l.v_cache.assign(static_cast<std::size_t>(s.window) * s.d, 0.0);
    s.layers.push_back(std::move(l));
  }
  s.dec_final = Norm::from(m.decoder_final_norm());
  const model::TaskHead& h = m.head(TaskKind::kCompression);
  s.head1 = Dense::from(*h.w1, h.b1);
  s.head2 = Dense::from(*h.w2, h.b2);
  s.support = token_support(s.vocab);
  s.run_encoder(ckpt);
  reset();
}

ModelPredictor::~ModelPredictor() = default;

int ModelPredictor::context_window() const { return impl_->window; }

void ModelPredictor::reset() {
  impl_->history.clear();
  impl_->restart({});
}

void ModelPredictor::push(TokenId id) {
  Impl& s = *impl_;
  if (id < 0 || static_cast<std::size_t>(id) >= s.vocab) throw UsageError("predictor: token id out of range");
  s.history.push_back(id);
  if (s.cache_len == static_cast<std::size_t>(s.window)) {
    const std::size_t keep = std::min(s.history.size(), static_cast<std::size_t>(s.window / 4));
    s.restart(std::span<const TokenId>(s.history).last(keep));
  } else {
    s.feed(id);
    s.have_pmf = false;
  }
  // Only the tail is ever needed again.
  if (s.history.size() > static_cast<std::size_t>(4 * s.window)) {
    s.history.erase(s.history.begin(), s.history.end() - s.window);
  }
}

std::vector<double> ModelPredictor::logits() { return impl_->compute_logits(); }

const QuantizedPmf& ModelPredictor::pmf() {
  Impl& s = *impl_;
  if (!s.have_pmf) {
    Vec logits = s.compute_logits();
    double m = -std::numeric_limits<double>::infinity();
    for (std::size_t t = 0; t < s.vocab; ++t) {
      if (s.support[t]) m = std::max(m, logits[t]);
    }
    Vec p(s.vocab, 0.0);
    for (std::size_t t = 0; t < s.vocab; ++t) {
      if (s.support[t]) p[t] = portable_exp(logits[t] - m);
    }
    s.pmf = QuantizedPmf::from_probabilities(p, s.support);
    s.have_pmf = true;
  }
  return s.pmf;
}

}  // namespace unilog::compression
