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

// Pretraining objectives, the optimizer, and the pretrain/finetune loops.

#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "unilog/common.hpp"
#include "unilog/model.hpp"

namespace unilog::training {

using model::Matrix;
using model::Parameter;

// --- masking objectives ----------------------------------------------------

struct MaskedExample {
  std::vector<TokenId> input_ids;
  std::vector<TokenId> target_ids;
  std::vector<std::size_t> mask_positions;  // sorted
};

inline constexpr double kDefaultMaskRate = 0.15;

// Each position is independently replaced by a sentinel with probability
// `rate`. With corrupt_rate > 0, that fraction of the selected positions
// instead receives a random regular token drawn from [first_regular,
// vocab_size) (these still count as masked).
MaskedExample bert_mask(std::span<const TokenId> ids, double rate, Rng& rng, double corrupt_rate = 0.0,
                        TokenId vocab_size = 0);

// Consecutive-span masking. Repeats until at least `budget` of the sequence
// is masked: the unmasked position with the largest uniform draw anchors a
// span of 2 or 3 tokens, shifted backwards when it would run off the end.
// A span never touches an existing one. Sequences shorter than 4 tokens use
// bert_mask instead.
MaskedExample span_mask(std::span<const TokenId> ids, double budget, Rng& rng);

// Builds the masked example for a fixed set of span anchors and lengths.
// Exposed so the anchor/overrun rule can be tested without randomness.
MaskedExample apply_span(std::span<const TokenId> ids, std::size_t anchor, std::size_t length);

struct PrefixSplit {
  std::vector<TokenId> input;
  std::vector<TokenId> target;
};

// Splits at ceil(split * len), kept within [1, len - 1].
PrefixSplit prefix_lm_example(std::span<const TokenId> ids, double split);

// Mean over rows and columns of (pred - target)^2.
double loss_reconstruction_l2(const Matrix& pred_embedding, const Matrix& target_embedding);

// --- optimizer ----------------------------------------------------------------

struct AdamWConfig {
  double lr = 5e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.01;
};

class AdamW {
 public:
  AdamW(std::vector<Parameter*> params, AdamWConfig config);

  // One update at learning rate `lr` using the gradients stored in the
  // parameters. Weight decay is decoupled and scaled by lr.
  void step(double lr);

  std::uint64_t steps() const { return t_; }
  model::TrainState state() const;
  // Restores moments saved for exactly this parameter list.
  void load_state(const model::TrainState& s);

 private:
  std::vector<Parameter*> params_;
  AdamWConfig config_;
  std::vector<Matrix> m_;
  std::vector<Matrix> v_;
  std::uint64_t t_ = 0;
};

// lr(t) = lr0 * gamma^t with gamma = 0.01^(1/total_steps).
class ExponentialSchedule {
 public:
  ExponentialSchedule(double lr0, std::uint64_t total_steps);
  double lr(std::uint64_t step) const;
  double gamma() const { return gamma_; }

 private:
  double lr0_;
  double gamma_;
};

// --- training loops -------------------------------------------------------

enum class Objective { kUnilogSpan, kBertStyle, kPrefixLm };

std::string_view objective_name(Objective o);
std::optional<Objective> parse_objective(std::string_view name);

struct TrainConfig {
  std::size_t batch_size = 128;
  double lr = 5e-4;
  std::uint64_t pretrain_steps = 2048;
  std::uint64_t finetune_steps = 2048;
  std::uint64_t seed = 42;
  double mask_budget = kDefaultMaskRate;
  double prefix_split = 0.5;
  double bert_corrupt_rate = 0.1;
  AdamWConfig adamw;
};

// Called after every optimizer step with (step, loss, lr); step counts from 1.
using StepCallback = std::function<void(std::uint64_t, double, double)>;

// Writes one "step<TAB>loss<TAB>lr" line per step.
StepCallback metrics_writer(std::ostream& os);

// Builds one pretraining example (no task prefix) from a token-id sequence.
model::Example make_pretrain_example(std::span<const TokenId> ids, Objective objective, const TrainConfig& cfg,
                                     TokenId vocab_size, Rng& rng);

// A checkpoint whose weights are freshly initialized from `seed`.
model::Checkpoint new_checkpoint(const model::ModelConfig& config, tokenizer::Vocabulary vocab,
                                 std::uint64_t seed);

struct PretrainResult {
  std::vector<double> losses;
};

// Trains the shared trunk of `ckpt.model` (not the task heads) on `corpus`,
// sequences of token ids truncated to max_len, for cfg.pretrain_steps steps.
// Examples are drawn in shuffled epochs. Throws UsageError on an empty corpus.
PretrainResult pretrain(model::Checkpoint& ckpt, std::span<const std::vector<TokenId>> corpus,
                        Objective objective, const TrainConfig& cfg, const StepCallback& on_step = {});

// One supervised example for finetuning; its meaning depends on the task.
//  - anomaly: `ids` is a normal sequence; the trainer span-masks it.
//  - failure: `ids` plus `label` 0/1.
//  - summarization: `ids` plus the target `summary`.
//  - compression: `ids` is a chunk of the token stream.
struct TaskSample {
  std::vector<TokenId> ids;
  int label = 0;
  std::vector<TokenId> summary;
};

// Turns a sample into a model example with the task prefix prepended.
model::Example make_task_example(TaskKind task, const TaskSample& sample, const TrainConfig& cfg, Rng& rng,
                                 int max_len);

struct FinetuneResult {
  std::vector<double> losses;
};

// Updates the trunk and the head of `task`; the other heads are untouched.
FinetuneResult finetune(model::Checkpoint& ckpt, TaskKind task, std::span<const TaskSample> dataset,
                        const TrainConfig& cfg, const StepCallback& on_step = {});

}  // namespace unilog::training
