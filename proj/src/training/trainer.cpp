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
#include <cmath>
#include <ostream>

#include "unilog/tokenizer.hpp"
#include "unilog/training.hpp"

namespace unilog::training {

using tokenizer::SpecialIds;

std::string_view objective_name(Objective o) {
  switch (o) {
    case Objective::kUnilogSpan: return "unilog";
    case Objective::kBertStyle: return "bert";
    case Objective::kPrefixLm: return "prefix";
  }
  return "unilog";
}

std::optional<Objective> parse_objective(std::string_view name) {
  if (name == "unilog") return Objective::kUnilogSpan;
  if (name == "bert") return Objective::kBertStyle;
  if (name == "prefix") return Objective::kPrefixLm;
  return std::nullopt;
}

StepCallback metrics_writer(std::ostream& os) {
  return [&os](std::uint64_t step, double loss, double lr) {
    os << step << '\t' << loss << '\t' << lr << '\n';
  };
}

model::Checkpoint new_checkpoint(const model::ModelConfig& config, tokenizer::Vocabulary vocab,
                                 std::uint64_t seed) {
  model::Checkpoint ckpt(config, std::move(vocab));
  Rng rng(seed);
  ckpt.model.init(rng);
  return ckpt;
}

namespace {

// Decoder input for reconstructing `target`: BOS followed by target[:-1].
std::vector<TokenId> shift_right(std::span<const TokenId> target) {
  std::vector<TokenId> dec;
  dec.reserve(target.size());
  dec.push_back(SpecialIds::kBos);
  dec.insert(dec.end(), target.begin(), target.end() - (target.empty() ? 0 : 1));
  return dec;
}

std::span<const TokenId> clip(std::span<const TokenId> ids, std::size_t max) {
  return ids.first(std::min(ids.size(), max));
}

// Steps through a dataset in shuffled epochs.
class Sampler {
 public:
  Sampler(std::size_t n, Rng& rng) : order_(n), rng_(rng) {
    for (std::size_t i = 0; i < n; ++i) order_[i] = i;
    shuffle(order_, rng_);
  }
  std::size_t next() {
    if (pos_ == order_.size()) {
      shuffle(order_, rng_);
      pos_ = 0;
    }
    return order_[pos_++];
  }

 private:
  std::vector<std::size_t> order_;
  Rng& rng_;
  std::size_t pos_ = 0;
};

// Optimizer moments for the whole model; entries for parameters outside the
// optimized set stay zero.
model::TrainState full_state(model::Transformer& m, const std::vector<Parameter*>& optimized, const AdamW& opt) {
  model::TrainState part = opt.state();
  model::TrainState full;
  full.step = part.step;
  for (Parameter* p : m.parameters()) {
    auto it = std::find(optimized.begin(), optimized.end(), p);
    if (it == optimized.end()) {
      full.m.push_back(Matrix::Zero(p->value.rows(), p->value.cols()));
      full.v.push_back(Matrix::Zero(p->value.rows(), p->value.cols()));
    } else {
      const auto i = static_cast<std::size_t>(it - optimized.begin());
      full.m.push_back(part.m[i]);
      full.v.push_back(part.v[i]);
    }
  }
  return full;
}

template <typename MakeExample>
std::vector<double> run_loop(model::Checkpoint& ckpt, std::optional<TaskKind> task, std::vector<Parameter*> params,
                             std::size_t n_samples, std::uint64_t steps, const TrainConfig& cfg,
                             const StepCallback& on_step, MakeExample make_example) {
  if (cfg.batch_size == 0) throw UsageError("batch size must be positive");
  Rng rng(cfg.seed);
  Rng order_rng = rng.fork();
  Rng mask_rng = rng.fork();
  Rng dropout_rng = rng.fork();
  Sampler sampler(n_samples, order_rng);
  AdamW opt(params, cfg.adamw);
  ExponentialSchedule schedule(cfg.lr, steps);
  std::vector<double> losses;
  losses.reserve(steps);
  model::Transformer& m = ckpt.model;
  for (std::uint64_t step = 0; step < steps; ++step) {
    std::vector<model::Example> batch;
    batch.reserve(cfg.batch_size);
    for (std::size_t b = 0; b < cfg.batch_size; ++b) batch.push_back(make_example(sampler.next(), mask_rng));
    nn::Tape tape;
    model::LossParts parts = m.batch_loss(tape, batch, task, &dropout_rng);
    const double loss = tape.scalar(parts.loss);
    if (!std::isfinite(loss)) throw DataError("training diverged: non-finite loss at step " + std::to_string(step + 1));
    m.zero_grad();
    tape.backward(parts.loss);
    const double lr = schedule.lr(step);
    opt.step(lr);
    losses.push_back(loss);
    if (on_step) on_step(step + 1, loss, lr);
  }
  ckpt.train_state = full_state(m, params, opt);
  m.zero_grad();
  return losses;
}

}  // namespace

model::Example make_pretrain_example(std::span<const TokenId> ids, Objective objective, const TrainConfig& cfg,
                                     TokenId vocab_size, Rng& rng) {
  model::Example ex;
  switch (objective) {
    case Objective::kUnilogSpan:
    case Objective::kBertStyle: {
      MaskedExample m = objective == Objective::kUnilogSpan
                            ? span_mask(ids, cfg.mask_budget, rng)
                            : bert_mask(ids, cfg.mask_budget, rng, cfg.bert_corrupt_rate, vocab_size);
      ex.input_ids = std::move(m.input_ids);
      ex.decoder_ids = shift_right(m.target_ids);
      ex.targets = std::move(m.target_ids);
      break;
    }
    case Objective::kPrefixLm: {
      if (ids.size() < 2) {
        // Nothing to split: reconstruct the single token from itself.
        ex.input_ids.assign(ids.begin(), ids.end());
        ex.decoder_ids = shift_right(ids);
        ex.targets.assign(ids.begin(), ids.end());
        break;
      }
      PrefixSplit s = prefix_lm_example(ids, cfg.prefix_split);
      ex.input_ids = std::move(s.input);
      ex.decoder_ids = shift_right(s.target);
      ex.targets = std::move(s.target);
      break;
    }
  }
  return ex;
}

PretrainResult pretrain(model::Checkpoint& ckpt, std::span<const std::vector<TokenId>> corpus, Objective objective,
                        const TrainConfig& cfg, const StepCallback& on_step) {
  std::vector<std::size_t> usable;
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    if (!corpus[i].empty()) usable.push_back(i);
  }
  if (usable.empty()) throw UsageError("pretrain: empty corpus");
  const auto max_tokens = static_cast<std::size_t>(ckpt.config.max_len);
  const auto vocab_size = static_cast<TokenId>(ckpt.config.vocab_size);
  auto make = [&](std::size_t i, Rng& rng) {
    return make_pretrain_example(clip(corpus[usable[i]], max_tokens), objective, cfg, vocab_size, rng);
  };
  PretrainResult out;
  out.losses = run_loop(ckpt, std::nullopt, ckpt.model.trunk_parameters(), usable.size(), cfg.pretrain_steps, cfg,
                        on_step, make);
  ckpt.provenance["pretrain.objective"] = std::string(objective_name(objective));
  ckpt.provenance["pretrain.steps"] = std::to_string(cfg.pretrain_steps);
  ckpt.provenance["pretrain.seed"] = std::to_string(cfg.seed);
  ckpt.provenance["pretrain.batch_size"] = std::to_string(cfg.batch_size);
  return out;
}

model::Example make_task_example(TaskKind task, const TaskSample& sample, const TrainConfig& cfg, Rng& rng,
                                 int max_len) {
  const auto max_tokens = static_cast<std::size_t>(max_len);
  const TokenId prefix = SpecialIds::task_prefix(task);
  model::Example ex;
  switch (task) {
    case TaskKind::kAnomaly: {
      auto ids = clip(sample.ids, max_tokens - 1);
      MaskedExample m = span_mask(ids, cfg.mask_budget, rng);
      ex.input_ids.push_back(prefix);
      ex.input_ids.insert(ex.input_ids.end(), m.input_ids.begin(), m.input_ids.end());
      ex.decoder_ids = shift_right(m.target_ids);
      ex.targets = std::move(m.target_ids);
      break;
    }
    case TaskKind::kFailure: {
      auto ids = clip(sample.ids, max_tokens - 1);
      ex.input_ids.push_back(prefix);
      ex.input_ids.insert(ex.input_ids.end(), ids.begin(), ids.end());
      ex.targets = {sample.label};
      break;
    }
    case TaskKind::kSummarization: {
      auto ids = clip(sample.ids, max_tokens - 1);
      auto summary = clip(sample.summary, max_tokens - 1);
      ex.input_ids.push_back(prefix);
      ex.input_ids.insert(ex.input_ids.end(), ids.begin(), ids.end());
      ex.decoder_ids.push_back(SpecialIds::kBos);
      ex.decoder_ids.insert(ex.decoder_ids.end(), summary.begin(), summary.end());
      ex.targets.assign(summary.begin(), summary.end());
      ex.targets.push_back(SpecialIds::kEos);
      break;
    }
    case TaskKind::kCompression: {
      auto ids = clip(sample.ids, max_tokens);
      ex.input_ids = {prefix};
      ex.decoder_ids = shift_right(ids);
      ex.targets.assign(ids.begin(), ids.end());
      break;
    }
  }
  return ex;
}

FinetuneResult finetune(model::Checkpoint& ckpt, TaskKind task, std::span<const TaskSample> dataset,
                        const TrainConfig& cfg, const StepCallback& on_step) {
  if (dataset.empty()) throw UsageError("finetune: empty dataset");
  for (const TaskSample& s : dataset) {
    if (s.ids.empty()) throw DataError("finetune: empty input sequence");
    if (task == TaskKind::kFailure && s.label != 0 && s.label != 1) {
      throw DataError("finetune: failure samples need a 0/1 label");
    }
    if (task == TaskKind::kSummarization && s.summary.empty()) {
      throw DataError("finetune: summarization samples need a summary");
    }
    if (task != TaskKind::kSummarization && !s.summary.empty()) {
      throw DataError("finetune: summary given for task " + std::string(tokenizer::task_name(task)));
    }
  }
  std::vector<Parameter*> params = ckpt.model.trunk_parameters();
  for (Parameter* p : ckpt.model.head_parameters(task)) params.push_back(p);
  const int max_len = ckpt.config.max_len;
  auto make = [&](std::size_t i, Rng& rng) { return make_task_example(task, dataset[i], cfg, rng, max_len); };
  FinetuneResult out;
  out.losses = run_loop(ckpt, task, params, dataset.size(), cfg.finetune_steps, cfg, on_step, make);
  const std::string key = "finetune." + std::string(tokenizer::task_name(task));
  ckpt.provenance[key + ".steps"] = std::to_string(cfg.finetune_steps);
  ckpt.provenance[key + ".seed"] = std::to_string(cfg.seed);
  return out;
}

}  // namespace unilog::training
