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

#include <algorithm>
#include <bit>
#include <cmath>

#include "unilog/model.hpp"

namespace unilog::model {

using tokenizer::SpecialIds;

double swish(double x, double beta) {
  const double z = beta * x;
  const double s = z >= 0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z));
  return x * s;
}

Matrix swish(const Matrix& x, double beta) {
  return x.unaryExpr([beta](double v) { return swish(v, beta); });
}

namespace {

void check_affine(const Matrix& x, const Matrix& W, const Matrix& b, const char* what) {
  if (x.cols() != W.rows() || b.rows() != 1 || b.cols() != W.cols()) {
    throw UsageError(std::string(what) + ": shape mismatch");
  }
}

Matrix affine(const Matrix& x, const Matrix& W, const Matrix& b) {
  Matrix y = x * W;
  y.rowwise() += b.row(0);
  return y;
}

}  // namespace

Matrix glu(const Matrix& x, const Matrix& W, const Matrix& V, const Matrix& b, const Matrix& c) {
  check_affine(x, W, b, "glu");
  check_affine(x, V, c, "glu");
  // sigmoid(z) == swish(1, z)
  Matrix gate = affine(x, W, b).unaryExpr([](double z) { return swish(1.0, z); });
  return gate.cwiseProduct(affine(x, V, c));
}

Matrix logact(const Matrix& x, const Matrix& W, const Matrix& V, const Matrix& b, const Matrix& c,
              double beta) {
  check_affine(x, W, b, "logact");
  check_affine(x, V, c, "logact");
  return swish(affine(x, W, b), beta).cwiseProduct(affine(x, V, c));
}

int relative_bucket(int rel, int n_buckets) {
  const int half = n_buckets / 2;
  const int max_exact = std::max(half / 2, 1);
  const int offset = rel > 0 ? half : 0;
  const unsigned n = static_cast<unsigned>(rel < 0 ? -rel : rel);
  if (n < static_cast<unsigned>(max_exact)) return offset + static_cast<int>(n);
  // floor(log2(n^2)) grows by one every half octave of n.
  const auto me = static_cast<unsigned>(max_exact);
  const int steps = static_cast<int>(std::bit_width(static_cast<unsigned long long>(n) * n)) -
                    static_cast<int>(std::bit_width(static_cast<unsigned long long>(me) * me));
  return offset + std::min(max_exact + steps, half - 1);
}

// ---------------------------------------------------------------------------

Transformer::Transformer(const ModelConfig& config) : config_(config) {
  config_.validate();
  const int D = config_.d_model;
  const int F = config_.d_ffn;
  params_.reserve(static_cast<std::size_t>(16 + 40 * config_.n_blocks));
  add_param("embed", config_.vocab_size, D);
  add_param("rel_bias", config_.n_rel_buckets, config_.n_heads);
  auto add_ln = [&](const std::string& p) {
    add_param(p + ".g", 1, D);
    add_param(p + ".b", 1, D);
  };
  auto add_attn = [&](const std::string& p) {
    for (const char* m : {".q", ".k", ".v", ".o"}) add_param(p + m, D, D);
  };
  auto add_ffn = [&](const std::string& p) {
    add_param(p + ".w", D, F);
    add_param(p + ".b", 1, F);
    add_param(p + ".v", D, F);
    add_param(p + ".c", 1, F);
    add_param(p + ".beta", 1, 1);
    add_param(p + ".out", F, D);
    add_param(p + ".out_b", 1, D);
  };
  for (int i = 0; i < config_.n_blocks; ++i) {
    const std::string p = "enc." + std::to_string(i);
    add_ln(p + ".ln_attn");
    add_attn(p + ".attn");
    add_ln(p + ".ln_ffn");
    add_ffn(p + ".ffn");
  }
  add_ln("enc.final");
  for (int i = 0; i < config_.n_blocks; ++i) {
    const std::string p = "dec." + std::to_string(i);
    add_ln(p + ".ln_self");
    add_attn(p + ".self");
    add_ln(p + ".ln_cross");
    add_attn(p + ".cross");
    add_ln(p + ".ln_ffn");
    add_ffn(p + ".ffn");
  }
  add_ln("dec.final");
  for (TaskKind task : kAllTasks) {
    const std::string p = "head." + std::string(tokenizer::task_name(task));
    const int out = task == TaskKind::kFailure ? 2 : D;
    add_param(p + ".w1", D, D);
    add_param(p + ".b1", 1, D);
    add_param(p + ".w2", D, out);
    add_param(p + ".b2", 1, out);
  }
  bind();
  // Deterministic non-random defaults so a fresh model is well defined even
  // before init(): gains 1, beta 1, everything else 0.
  for (auto& p : params_) {
    const bool is_one = p.name.ends_with(".g") || p.name.ends_with(".beta");
    p.value.setConstant(is_one ? 1.0 : 0.0);
  }
}

Transformer::Transformer(const Transformer& other)
    : config_(other.config_), params_(other.params_), index_(other.index_) {
  bind();
}

Transformer& Transformer::operator=(const Transformer& other) {
  if (this != &other) {
    config_ = other.config_;
    params_ = other.params_;
    index_ = other.index_;
    bind();
  }
  return *this;
}

Parameter& Transformer::add_param(std::string name, int rows, int cols) {
  if (index_.contains(name)) throw UsageError("duplicate parameter " + name);
  index_.emplace(name, params_.size());
  Parameter p;
  p.name = std::move(name);
  p.value = Matrix::Zero(rows, cols);
  p.grad = Matrix::Zero(rows, cols);
  params_.push_back(std::move(p));
  return params_.back();
}

Parameter& Transformer::param(std::string_view name) {
  auto it = index_.find(name);
  if (it == index_.end()) throw UsageError("unknown parameter " + std::string(name));
  return params_[it->second];
}

const Parameter& Transformer::param(std::string_view name) const {
  auto it = index_.find(name);
  if (it == index_.end()) throw UsageError("unknown parameter " + std::string(name));
  return params_[it->second];
}

void Transformer::bind() {
  embedding_ = &param("embed");
  rel_bias_ = &param("rel_bias");
  auto ln = [&](const std::string& p) { return LayerNormParams{&param(p + ".g"), &param(p + ".b")}; };
  auto attn = [&](const std::string& p) {
    return AttentionParams{&param(p + ".q"), &param(p + ".k"), &param(p + ".v"), &param(p + ".o")};
  };
  auto ffn = [&](const std::string& p) {
    return FfnParams{&param(p + ".w"), &param(p + ".b"),    &param(p + ".v"),    &param(p + ".c"),
                     &param(p + ".beta"), &param(p + ".out"), &param(p + ".out_b")};
  };
  encoder_.clear();
  decoder_.clear();
  heads_.clear();
  for (int i = 0; i < config_.n_blocks; ++i) {
    const std::string p = "enc." + std::to_string(i);
    encoder_.push_back({ln(p + ".ln_attn"), attn(p + ".attn"), ln(p + ".ln_ffn"), ffn(p + ".ffn")});
  }
  enc_final_ = ln("enc.final");
  for (int i = 0; i < config_.n_blocks; ++i) {
    const std::string p = "dec." + std::to_string(i);
    decoder_.push_back({ln(p + ".ln_self"), attn(p + ".self"), ln(p + ".ln_cross"), attn(p + ".cross"),
                        ln(p + ".ln_ffn"), ffn(p + ".ffn")});
  }
  dec_final_ = ln("dec.final");
  for (TaskKind task : kAllTasks) {
    const std::string p = "head." + std::string(tokenizer::task_name(task));
    heads_.push_back({&param(p + ".w1"), &param(p + ".b1"), &param(p + ".w2"), &param(p + ".b2")});
  }
}

std::vector<Parameter*> Transformer::parameters() {
  std::vector<Parameter*> out;
  out.reserve(params_.size());
  for (auto& p : params_) out.push_back(&p);
  return out;
}

std::vector<const Parameter*> Transformer::parameters() const {
  std::vector<const Parameter*> out;
  out.reserve(params_.size());
  for (const auto& p : params_) out.push_back(&p);
  return out;
}

std::vector<Parameter*> Transformer::head_parameters(TaskKind task) {
  const TaskHead& h = heads_[static_cast<std::size_t>(task)];
  return {h.w1, h.b1, h.w2, h.b2};
}

std::vector<Parameter*> Transformer::trunk_parameters() {
  std::vector<Parameter*> out;
  for (auto& p : params_) {
    if (!p.name.starts_with("head.")) out.push_back(&p);
  }
  return out;
}

void Transformer::init(Rng& rng) {
  for (auto& p : params_) {
    const std::string& n = p.name;
    if (n.ends_with(".g") || n.ends_with(".beta")) {
      p.value.setOnes();
    } else if (n.starts_with("head.") && (n.ends_with(".w2") || n.ends_with(".b2"))) {
      // A zero final layer makes every head start as a no-op: the residual
      // heads pass states through and the failure head outputs 50/50.
      p.value.setZero();
    } else if (p.value.rows() == 1 || n == "rel_bias") {
      p.value.setZero();
    } else {
      for (Eigen::Index i = 0; i < p.value.size(); ++i) p.value.data()[i] = 0.02 * rng.normal();
    }
  }
  zero_grad();
}

void Transformer::zero_grad() {
  for (auto& p : params_) p.zero_grad();
}

void Transformer::check_lengths(std::size_t n) const {
  if (n > static_cast<std::size_t>(config_.max_len)) {
    throw UsageError("sequence of length " + std::to_string(n) + " exceeds max_len " +
                     std::to_string(config_.max_len));
  }
}

// ---------------------------------------------------------------------------

Var Transformer::layer_norm(Tape& t, const LayerNormParams& p, Var x) {
  return nn::layer_norm(t, x, t.param(*p.gain), t.param(*p.bias));
}

Var Transformer::attention_sublayer(Tape& t, const AttentionParams& p, Var q_in, Var kv_in,
                                    std::span<const Segment> q_segs, std::span<const Segment> k_segs,
                                    bool causal, bool rel, Rng* rng) {
  Var q = nn::matmul(t, q_in, t.param(*p.wq));
  Var k = nn::matmul(t, kv_in, t.param(*p.wk));
  Var v = nn::matmul(t, kv_in, t.param(*p.wv));
  nn::AttentionSpec spec;
  spec.n_heads = config_.n_heads;
  spec.causal = causal;
  spec.dropout = config_.dropout;
  spec.rng = rng;
  if (rel) {
    spec.rel_bias = t.param(*rel_bias_);
    const int nb = config_.n_rel_buckets;
    spec.bucket = [nb](int r) { return relative_bucket(r, nb); };
  }
  Var a = nn::attention(t, q, k, v, q_segs, k_segs, spec);
  return nn::matmul(t, a, t.param(*p.wo));
}

Var Transformer::ffn_sublayer(Tape& t, const FfnParams& p, Var x, Rng* rng) {
  Var gate = nn::add_bias(t, nn::matmul(t, x, t.param(*p.w)), t.param(*p.b));
  Var lin = nn::add_bias(t, nn::matmul(t, x, t.param(*p.v)), t.param(*p.c));
  Var h = nn::mul(t, nn::swish(t, gate, t.param(*p.beta)), lin);
  h = nn::dropout(t, h, config_.dropout, rng);
  return nn::add_bias(t, nn::matmul(t, h, t.param(*p.out)), t.param(*p.out_b));
}

Var Transformer::encoder_block_forward(Tape& t, int block, Var x, std::span<const Segment> segs,
                                       Rng* rng) {
  const EncoderBlock& b = encoder_[static_cast<std::size_t>(block)];
  Var h = layer_norm(t, b.ln_attn, x);
  h = attention_sublayer(t, b.self_attn, h, h, segs, segs, false, true, rng);
  x = nn::add(t, x, nn::dropout(t, h, config_.dropout, rng));
  h = ffn_sublayer(t, b.ffn, layer_norm(t, b.ln_ffn, x), rng);
  return nn::add(t, x, nn::dropout(t, h, config_.dropout, rng));
}

Var Transformer::encode(Tape& t, std::span<const TokenId> ids, std::span<const Segment> segs, Rng* rng) {
  for (const auto& s : segs) check_lengths(static_cast<std::size_t>(s.length));
  Var x = nn::dropout(t, nn::embedding(t, t.param(*embedding_), ids), config_.dropout, rng);
  for (int i = 0; i < config_.n_blocks; ++i) x = encoder_block_forward(t, i, x, segs, rng);
  return nn::dropout(t, layer_norm(t, enc_final_, x), config_.dropout, rng);
}

Var Transformer::decode(Tape& t, std::span<const TokenId> ids, std::span<const Segment> segs, Var memory,
                        std::span<const Segment> memory_segs, Rng* rng) {
  for (const auto& s : segs) check_lengths(static_cast<std::size_t>(s.length));
  Var x = nn::dropout(t, nn::embedding(t, t.param(*embedding_), ids), config_.dropout, rng);
  for (const DecoderBlock& b : decoder_) {
    Var h = layer_norm(t, b.ln_self, x);
    h = attention_sublayer(t, b.self_attn, h, h, segs, segs, true, true, rng);
    x = nn::add(t, x, nn::dropout(t, h, config_.dropout, rng));
    h = layer_norm(t, b.ln_cross, x);
    h = attention_sublayer(t, b.cross_attn, h, memory, segs, memory_segs, false, false, rng);
    x = nn::add(t, x, nn::dropout(t, h, config_.dropout, rng));
    h = ffn_sublayer(t, b.ffn, layer_norm(t, b.ln_ffn, x), rng);
    x = nn::add(t, x, nn::dropout(t, h, config_.dropout, rng));
  }
  return nn::dropout(t, layer_norm(t, dec_final_, x), config_.dropout, rng);
}

Var Transformer::logits(Tape& t, Var hidden) { return nn::matmul_nt(t, hidden, t.param(*embedding_)); }

Var Transformer::apply_head(Tape& t, TaskKind task, Var x) {
  const TaskHead& h = heads_[static_cast<std::size_t>(task)];
  Var z = nn::tanh(t, nn::add_bias(t, nn::matmul(t, x, t.param(*h.w1)), t.param(*h.b1)));
  return nn::add_bias(t, nn::matmul(t, z, t.param(*h.w2)), t.param(*h.b2));
}

namespace {

struct Packed {
  std::vector<TokenId> ids;
  std::vector<Segment> segs;
};

template <typename Get>
Packed pack(std::span<const Example> batch, Get get) {
  Packed p;
  for (const auto& ex : batch) {
    const auto& v = get(ex);
    if (v.empty()) throw UsageError("empty sequence in batch");
    p.segs.push_back({static_cast<std::int32_t>(p.ids.size()), static_cast<std::int32_t>(v.size())});
    p.ids.insert(p.ids.end(), v.begin(), v.end());
  }
  return p;
}

// Graph nodes shared by batch_loss and forward.
struct Built {
  Var logits;
  Var head;
  Var loss;
  std::vector<double> l2;
};

Built build(Transformer& m, Tape& t, std::span<const Example> batch, std::optional<TaskKind> task, Rng* rng,
            bool with_loss) {
  Built out;
  if (batch.empty()) throw UsageError("empty batch");
  Packed enc = pack(batch, [](const Example& e) -> const std::vector<TokenId>& { return e.input_ids; });
  Var memory = m.encode(t, enc.ids, enc.segs, rng);

  if (task == TaskKind::kFailure) {
    Var pooled = nn::mean_pool(t, memory, enc.segs);
    out.head = m.apply_head(t, TaskKind::kFailure, pooled);
    if (with_loss) {
      std::vector<std::int32_t> labels;
      for (const auto& ex : batch) {
        if (ex.targets.size() != 1 || ex.targets[0] < 0 || ex.targets[0] > 1) {
          throw UsageError("failure examples need exactly one 0/1 label");
        }
        labels.push_back(ex.targets[0]);
      }
      out.loss = nn::cross_entropy(t, out.head, labels);
    }
    return out;
  }

  Packed dec = pack(batch, [](const Example& e) -> const std::vector<TokenId>& { return e.decoder_ids; });
  Var hidden = m.decode(t, dec.ids, dec.segs, memory, enc.segs, rng);
  Var proj_in = hidden;
  if (task == TaskKind::kSummarization || task == TaskKind::kCompression) {
    out.head = m.apply_head(t, *task, hidden);
    proj_in = nn::add(t, hidden, out.head);
  }
  out.logits = m.logits(t, proj_in);
  if (!with_loss) {
    if (task == TaskKind::kAnomaly) out.head = m.apply_head(t, TaskKind::kAnomaly, hidden);
    return out;
  }

  std::vector<std::int32_t> targets;
  targets.reserve(dec.ids.size());
  for (std::size_t b = 0; b < batch.size(); ++b) {
    if (batch[b].targets.size() != batch[b].decoder_ids.size()) {
      throw UsageError("targets must align with decoder inputs");
    }
    targets.insert(targets.end(), batch[b].targets.begin(), batch[b].targets.end());
  }
  out.loss = nn::cross_entropy(t, out.logits, targets);
  if (task != TaskKind::kAnomaly) return out;

  // Masked positions: decoder step i reconstructs the token that the
  // corrupted encoder input carries at i (after the task prefix).
  std::vector<std::int32_t> rows;
  std::vector<TokenId> masked_targets;
  std::vector<std::size_t> owner;
  for (std::size_t b = 0; b < batch.size(); ++b) {
    const auto& ex = batch[b];
    const std::size_t shift = ex.input_ids.size() == ex.targets.size() + 1 ? 1 : 0;
    for (std::size_t i = 0; i < ex.targets.size(); ++i) {
      if (i + shift < ex.input_ids.size() && SpecialIds::is_sentinel(ex.input_ids[i + shift])) {
        rows.push_back(dec.segs[b].offset + static_cast<std::int32_t>(i));
        masked_targets.push_back(ex.targets[i]);
        owner.push_back(b);
      }
    }
  }
  out.l2.assign(batch.size(), 0.0);
  if (rows.empty()) return out;
  Var probs = nn::softmax_rows(t, nn::gather_rows(t, out.logits, rows));
  Var expected = nn::matmul(t, probs, t.param(m.embedding()));
  out.head = m.apply_head(t, TaskKind::kAnomaly, nn::gather_rows(t, hidden, rows));
  Var pred = nn::add(t, expected, out.head);
  Var target = nn::embedding(t, t.param(m.embedding()), masked_targets);
  Var l2 = nn::mean_squared(t, pred, target);
  out.loss = nn::add(t, out.loss, l2);

  const Matrix diff = t.value(pred) - t.value(target);
  std::vector<std::size_t> count(batch.size(), 0);
  for (std::size_t r = 0; r < rows.size(); ++r) {
    out.l2[owner[r]] += diff.row(static_cast<Eigen::Index>(r)).squaredNorm();
    ++count[owner[r]];
  }
  const double d = static_cast<double>(diff.cols());
  for (std::size_t b = 0; b < batch.size(); ++b) {
    if (count[b]) out.l2[b] /= static_cast<double>(count[b]) * d;
  }
  return out;
}

}  // namespace

LossParts Transformer::batch_loss(Tape& t, std::span<const Example> batch, std::optional<TaskKind> task,
                                  Rng* rng) {
  Built b = build(*this, t, batch, task, rng, true);
  return {b.loss, std::move(b.l2)};
}

ForwardOutput Transformer::forward(std::span<const TokenId> input_ids, std::span<const TokenId> decoder_ids,
                                   std::optional<TaskKind> task,
                                   std::optional<std::span<const TokenId>> targets) {
  if (input_ids.empty()) throw UsageError("forward: empty input");
  for (TokenId id : input_ids) {
    if (id < 0 || id >= config_.vocab_size) throw UsageError("forward: token id out of range");
  }
  if (task) {
    if (input_ids[0] != SpecialIds::task_prefix(*task)) {
      throw UsageError("forward: input must start with the " + std::string(tokenizer::task_prefix_token(*task)) +
                       " prefix");
    }
  }
  if (task != TaskKind::kFailure && decoder_ids.empty()) throw UsageError("forward: empty decoder input");

  Example ex;
  ex.input_ids.assign(input_ids.begin(), input_ids.end());
  ex.decoder_ids.assign(decoder_ids.begin(), decoder_ids.end());
  if (targets) ex.targets.assign(targets->begin(), targets->end());
  Tape t(false);
  Built b = build(*this, t, std::span<const Example>(&ex, 1), task, nullptr, targets.has_value());
  ForwardOutput out;
  if (b.logits.valid()) out.logits = t.value(b.logits);
  if (b.head.valid()) out.head_output = t.value(b.head);
  if (b.loss.valid()) out.loss = t.scalar(b.loss);
  return out;
}

std::vector<double> Transformer::anomaly_scores(std::span<const Example> batch) {
  Tape t(false);
  return build(*this, t, batch, TaskKind::kAnomaly, nullptr, true).l2;
}

}  // namespace unilog::model
