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

// Inference for the downstream tasks and their evaluation metrics.

#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "unilog/model.hpp"

namespace unilog::tasks {

inline constexpr double kDefaultAnomalyThreshold = 1e-3;
// Seed of the masking applied when scoring a sequence. Every sequence is
// masked with a fresh stream from this seed, so its verdict does not depend
// on what else is scored alongside it.
inline constexpr std::uint64_t kEvalMaskSeed = 0x5eed;

struct AnomalyVerdict {
  double score = 0.0;
  double threshold = kDefaultAnomalyThreshold;
  bool anomalous = false;
};

// anomalous iff score > threshold.
AnomalyVerdict make_verdict(double score, double threshold);

AnomalyVerdict detect_anomaly(model::Checkpoint& ckpt, std::span<const TokenId> ids,
                              double threshold = kDefaultAnomalyThreshold, std::uint64_t eval_seed = kEvalMaskSeed);
// Batched form of detect_anomaly with identical per-sequence results.
std::vector<AnomalyVerdict> detect_anomalies(model::Checkpoint& ckpt, std::span<const std::vector<TokenId>> seqs,
                                             double threshold = kDefaultAnomalyThreshold,
                                             std::uint64_t eval_seed = kEvalMaskSeed);

// Probability of the failure class.
double predict_failure(model::Checkpoint& ckpt, std::span<const TokenId> ids);
std::vector<double> predict_failures(model::Checkpoint& ckpt, std::span<const std::vector<TokenId>> seqs);

// Greedy decoding; stops at EOS (not included in the output) or max_out.
std::vector<TokenId> summarize(model::Checkpoint& ckpt, std::span<const TokenId> ids, std::size_t max_out);

// --- metrics -------------------------------------------------------------------

struct MetricsReport {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t fn = 0;
};

// Harmonic mean; 0 when both are 0.
double f1_score(double precision, double recall);

// Counts over the positive class; 0/0 is taken as 0.
MetricsReport precision_recall_f1(const std::vector<bool>& predicted, const std::vector<bool>& truth);

// Token-level overlap of two token multisets.
MetricsReport token_f1(std::span<const std::string> predicted, std::span<const std::string> truth);

// Micro-averaged token-level scores over many (predicted, truth) pairs.
MetricsReport token_f1(std::span<const std::vector<std::string>> predicted,
                       std::span<const std::vector<std::string>> truth);

// compressed / original; original must be positive.
double compression_rate(std::uint64_t compressed_bytes, std::uint64_t original_bytes);

// "key=value" lines: precision, recall, f1, tp, fp, fn.
std::string report_kv(const MetricsReport& r);

}  // namespace unilog::tasks
