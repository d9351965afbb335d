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

// Encoder-decoder transformer with Pre-LN blocks, a LogAct feed-forward
// layer, one relative-position bias table shared by every self-attention
// layer, embeddings tied to the output projection, and four task heads.

#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "unilog/common.hpp"
#include "unilog/tape.hpp"
#include "unilog/tokenizer.hpp"

namespace unilog::model {

using nn::Matrix;
using nn::Parameter;
using nn::Segment;
using nn::Tape;
using nn::Var;

struct ModelConfig {
  int n_blocks = 3;
  int n_heads = 4;
  int d_head = 32;
  int d_model = 128;
  int d_ffn = 512;
  double dropout = 0.3;
  int max_len = 180;
  int n_rel_buckets = 32;
  int vocab_size = 0;

  // Throws UsageError naming the first violated constraint.
  void validate() const;

  // Canonical "key=value" lines in a fixed order.
  std::string to_kv() const;
  static ModelConfig from_kv(std::string_view text);

  bool operator==(const ModelConfig&) const = default;
};

// Scalar and matrix forms of the activation functions, for use outside the
// tape (tests, documentation, the compression predictor).
double swish(double x, double beta);
Matrix swish(const Matrix& x, double beta);
// sigmoid(xW + b) * (xV + c)
Matrix glu(const Matrix& x, const Matrix& W, const Matrix& V, const Matrix& b, const Matrix& c);
// swish(xW + b, beta) * (xV + c)
Matrix logact(const Matrix& x, const Matrix& W, const Matrix& V, const Matrix& b, const Matrix& c,
              double beta);

// Maps key_pos - query_pos to a bias bucket. Offsets inside +-(n_buckets/4)
// get their own bucket; farther offsets share buckets whose width doubles
// every half octave. Negative and positive offsets use disjoint halves.
int relative_bucket(int rel, int n_buckets);

struct AttentionParams {
  Parameter* wq = nullptr;
  Parameter* wk = nullptr;
  Parameter* wv = nullptr;
  Parameter* wo = nullptr;
};

struct FfnParams {
  Parameter* w = nullptr;
  Parameter* b = nullptr;
  Parameter* v = nullptr;
  Parameter* c = nullptr;
  Parameter* beta = nullptr;
  Parameter* out = nullptr;
  Parameter* out_b = nullptr;
};

struct LayerNormParams {
  Parameter* gain = nullptr;
  Parameter* bias = nullptr;
};

struct EncoderBlock {
  LayerNormParams ln_attn;
  AttentionParams self_attn;
  LayerNormParams ln_ffn;
  FfnParams ffn;
};

struct DecoderBlock {
  LayerNormParams ln_self;
  AttentionParams self_attn;
  LayerNormParams ln_cross;
  AttentionParams cross_attn;
  LayerNormParams ln_ffn;
  FfnParams ffn;
};

// Two affine layers with tanh between them.
struct TaskHead {
  Parameter* w1 = nullptr;
  Parameter* b1 = nullptr;
  Parameter* w2 = nullptr;
  Parameter* b2 = nullptr;
};

// One training or scoring example. For the failure task `targets` holds the
// single class label and the decoder is not run.
struct Example {
  std::vector<TokenId> input_ids;
  std::vector<TokenId> decoder_ids;
  std::vector<TokenId> targets;
};

struct ForwardOutput {
  Matrix logits;       // decoder positions x vocab_size (empty for failure)
  Matrix head_output;  // task head activation; empty when no task
  double loss = 0.0;   // set when targets were supplied
};

// Per-example scores computed alongside a batched loss.
struct LossParts {
  Var loss;
  std::vector<double> l2;  // anomaly reconstruction loss (anomaly task only)
};

class Transformer {
 public:
  explicit Transformer(const ModelConfig& config);
  Transformer(const Transformer& other);
  Transformer& operator=(const Transformer& other);

  const ModelConfig& config() const { return config_; }

  // Every parameter in its fixed declaration order.
  std::vector<Parameter*> parameters();
  std::vector<const Parameter*> parameters() const;
  Parameter& param(std::string_view name);
  const Parameter& param(std::string_view name) const;
  // Parameters belonging to a task head, and to the shared trunk.
  std::vector<Parameter*> head_parameters(TaskKind task);
  std::vector<Parameter*> trunk_parameters();

  void init(Rng& rng);
  void zero_grad();

  Parameter& embedding() { return *embedding_; }
  const Parameter& embedding() const { return *embedding_; }
  Parameter& rel_bias() { return *rel_bias_; }
  const Parameter& rel_bias() const { return *rel_bias_; }
  // Blocks hold pointers into this model's parameters.
  const EncoderBlock& encoder_block(int i) const { return encoder_[static_cast<std::size_t>(i)]; }
  const DecoderBlock& decoder_block(int i) const { return decoder_[static_cast<std::size_t>(i)]; }
  const LayerNormParams& encoder_final_norm() const { return enc_final_; }
  const LayerNormParams& decoder_final_norm() const { return dec_final_; }
  const TaskHead& head(TaskKind t) const { return heads_[static_cast<std::size_t>(t)]; }

  // --- graph builders over packed batches -------------------------------
  // `rng` enables dropout; pass nullptr for deterministic evaluation.

  Var encode(Tape& t, std::span<const TokenId> ids, std::span<const Segment> segs, Rng* rng);
  Var decode(Tape& t, std::span<const TokenId> ids, std::span<const Segment> segs, Var memory,
             std::span<const Segment> memory_segs, Rng* rng);
  Var encoder_block_forward(Tape& t, int block, Var x, std::span<const Segment> segs, Rng* rng);
  Var logits(Tape& t, Var hidden);
  Var apply_head(Tape& t, TaskKind task, Var x);

  // Mean loss over a batch. With no task this is the pretraining
  // reconstruction cross entropy. Anomaly adds the embedding-space l2 loss at
  // masked positions; failure is two-way cross entropy on the pooled encoder;
  // summarization and compression route decoder states through their head
  // before the tied projection.
  LossParts batch_loss(Tape& t, std::span<const Example> batch, std::optional<TaskKind> task,
                       Rng* rng);

  // Single-example forward without dropout. Validates the task prefix.
  ForwardOutput forward(std::span<const TokenId> input_ids, std::span<const TokenId> decoder_ids,
                        std::optional<TaskKind> task,
                        std::optional<std::span<const TokenId>> targets = std::nullopt);

  // Embedding-space reconstruction loss of each example in the batch; no
  // dropout, no gradient.
  std::vector<double> anomaly_scores(std::span<const Example> batch);

 private:
  Parameter& add_param(std::string name, int rows, int cols);
  void bind();
  void check_lengths(std::size_t n) const;
  Var attention_sublayer(Tape& t, const AttentionParams& p, Var q_in, Var kv_in,
                         std::span<const Segment> q_segs, std::span<const Segment> k_segs,
                         bool causal, bool rel, Rng* rng);
  Var ffn_sublayer(Tape& t, const FfnParams& p, Var x, Rng* rng);
  Var layer_norm(Tape& t, const LayerNormParams& p, Var x);

  ModelConfig config_;
  std::vector<Parameter> params_;
  std::map<std::string, std::size_t, std::less<>> index_;
  Parameter* embedding_ = nullptr;
  Parameter* rel_bias_ = nullptr;
  std::vector<EncoderBlock> encoder_;
  std::vector<DecoderBlock> decoder_;
  LayerNormParams enc_final_;
  LayerNormParams dec_final_;
  std::vector<TaskHead> heads_;
};

// --- checkpoints -------------------------------------------------------------

struct TrainState {
  std::uint64_t step = 0;
  std::vector<Matrix> m;
  std::vector<Matrix> v;
};

struct Checkpoint {
  ModelConfig config;
  tokenizer::Vocabulary vocab;
  Transformer model;
  std::map<std::string, std::string> provenance;
  std::optional<TrainState> train_state;

  Checkpoint(ModelConfig cfg, tokenizer::Vocabulary voc)
      : config(cfg), vocab(std::move(voc)), model(cfg) {}
};

Bytes serialize_checkpoint(const Checkpoint& ckpt);
Checkpoint parse_checkpoint(std::span<const std::uint8_t> bytes);
void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);
// SHA-256 of the serialized checkpoint.
Sha256 checkpoint_hash(const Checkpoint& ckpt);

}  // namespace unilog::model
