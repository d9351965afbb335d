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

#include "unilog/tasks.hpp"
#include "unilog/tokenizer.hpp"
#include "unilog/training.hpp"

namespace unilog::tasks {

using tokenizer::SpecialIds;

namespace {

constexpr std::size_t kScoreBatch = 64;

std::span<const TokenId> clip(std::span<const TokenId> ids, int max_len) {
  return ids.first(std::min(ids.size(), static_cast<std::size_t>(max_len - 1)));
}

}  // namespace

AnomalyVerdict make_verdict(double score, double threshold) { return {score, threshold, score > threshold}; }

std::vector<AnomalyVerdict> detect_anomalies(model::Checkpoint& ckpt, std::span<const std::vector<TokenId>> seqs,
                                             double threshold, std::uint64_t eval_seed) {
  const training::TrainConfig cfg;
  std::vector<AnomalyVerdict> out;
  out.reserve(seqs.size());
  for (std::size_t start = 0; start < seqs.size(); start += kScoreBatch) {
    const std::size_t end = std::min(seqs.size(), start + kScoreBatch);
    std::vector<model::Example> batch;
    for (std::size_t i = start; i < end; ++i) {
      if (seqs[i].empty()) throw UsageError("detect_anomaly: empty sequence");
      Rng rng(eval_seed);
      training::TaskSample s;
      s.ids = seqs[i];
      batch.push_back(training::make_task_example(TaskKind::kAnomaly, s, cfg, rng, ckpt.config.max_len));
    }
    for (double score : ckpt.model.anomaly_scores(batch)) out.push_back(make_verdict(score, threshold));
  }
  return out;
}

AnomalyVerdict detect_anomaly(model::Checkpoint& ckpt, std::span<const TokenId> ids, double threshold,
                              std::uint64_t eval_seed) {
  std::vector<std::vector<TokenId>> one{std::vector<TokenId>(ids.begin(), ids.end())};
  return detect_anomalies(ckpt, one, threshold, eval_seed).front();
}

std::vector<double> predict_failures(model::Checkpoint& ckpt, std::span<const std::vector<TokenId>> seqs) {
  std::vector<double> out;
  out.reserve(seqs.size());
  const TokenId prefix = SpecialIds::task_prefix(TaskKind::kFailure);
  for (std::size_t start = 0; start < seqs.size(); start += kScoreBatch) {
    const std::size_t end = std::min(seqs.size(), start + kScoreBatch);
    std::vector<TokenId> ids;
    std::vector<model::Segment> segs;
    for (std::size_t i = start; i < end; ++i) {
      if (seqs[i].empty()) throw UsageError("predict_failure: empty sequence");
      auto body = clip(seqs[i], ckpt.config.max_len);
      segs.push_back({static_cast<std::int32_t>(ids.size()), static_cast<std::int32_t>(body.size() + 1)});
      ids.push_back(prefix);
      ids.insert(ids.end(), body.begin(), body.end());
    }
    nn::Tape t(false);
    nn::Var memory = ckpt.model.encode(t, ids, segs, nullptr);
    nn::Var logits = ckpt.model.apply_head(t, TaskKind::kFailure, nn::mean_pool(t, memory, segs));
    const model::Matrix& z = t.value(logits);
    for (Eigen::Index r = 0; r < z.rows(); ++r) {
      // Two-way softmax written as a logistic of the logit difference.
      const double d = z(r, 1) - z(r, 0);
      out.push_back(d >= 0 ? 1.0 / (1.0 + std::exp(-d)) : std::exp(d) / (1.0 + std::exp(d)));
    }
  }
  return out;
}

double predict_failure(model::Checkpoint& ckpt, std::span<const TokenId> ids) {
  std::vector<std::vector<TokenId>> one{std::vector<TokenId>(ids.begin(), ids.end())};
  return predict_failures(ckpt, one).front();
}

std::vector<TokenId> summarize(model::Checkpoint& ckpt, std::span<const TokenId> ids, std::size_t max_out) {
  if (ids.empty()) throw UsageError("summarize: empty sequence");
  model::Transformer& m = ckpt.model;
  auto body = clip(ids, ckpt.config.max_len);
  std::vector<TokenId> enc{SpecialIds::task_prefix(TaskKind::kSummarization)};
  enc.insert(enc.end(), body.begin(), body.end());
  const std::vector<model::Segment> enc_segs{{0, static_cast<std::int32_t>(enc.size())}};
  max_out = std::min(max_out, static_cast<std::size_t>(ckpt.config.max_len - 1));

  nn::Tape t(false);
  nn::Var memory = m.encode(t, enc, enc_segs, nullptr);
  std::vector<TokenId> dec{SpecialIds::kBos};
  std::vector<TokenId> out;
  while (out.size() < max_out) {
    const std::vector<model::Segment> segs{{0, static_cast<std::int32_t>(dec.size())}};
    nn::Var h = m.decode(t, dec, segs, memory, enc_segs, nullptr);
    const auto last = std::vector<std::int32_t>{static_cast<std::int32_t>(dec.size() - 1)};
    h = nn::gather_rows(t, h, last);
    h = nn::add(t, h, m.apply_head(t, TaskKind::kSummarization, h));
    const model::Matrix& logits = t.value(m.logits(t, h));
    Eigen::Index best = 0;
    logits.row(0).maxCoeff(&best);
    const auto next = static_cast<TokenId>(best);
    if (next == SpecialIds::kEos) break;
    out.push_back(next);
    dec.push_back(next);
  }
  return out;
}

}  // namespace unilog::tasks
