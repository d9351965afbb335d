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

#include <cstdio>
#include <map>

#include "unilog/tasks.hpp"

namespace unilog::tasks {

namespace {

MetricsReport from_counts(std::size_t tp, std::size_t fp, std::size_t fn) {
  MetricsReport r;
  r.tp = tp;
  r.fp = fp;
  r.fn = fn;
  r.precision = tp + fp ? static_cast<double>(tp) / static_cast<double>(tp + fp) : 0.0;
  r.recall = tp + fn ? static_cast<double>(tp) / static_cast<double>(tp + fn) : 0.0;
  r.f1 = tp ? f1_score(r.precision, r.recall) : 0.0;
  return r;
}

void count_overlap(std::span<const std::string> predicted, std::span<const std::string> truth, std::size_t& tp,
                   std::size_t& fp, std::size_t& fn) {
  std::map<std::string_view, long> remaining;
  for (const auto& t : truth) ++remaining[t];
  std::size_t hit = 0;
  for (const auto& p : predicted) {
    auto it = remaining.find(p);
    if (it != remaining.end() && it->second > 0) {
      --it->second;
      ++hit;
    }
  }
  tp += hit;
  fp += predicted.size() - hit;
  fn += truth.size() - hit;
}

}  // namespace

double f1_score(double precision, double recall) {
  if (precision + recall <= 0.0) return 0.0;
  return 2.0 * precision * recall / (precision + recall);
}

MetricsReport precision_recall_f1(const std::vector<bool>& predicted, const std::vector<bool>& truth) {
  if (predicted.size() != truth.size()) throw UsageError("precision_recall_f1: length mismatch");
  std::size_t tp = 0, fp = 0, fn = 0;
  for (std::size_t i = 0; i < predicted.size(); ++i) {
    if (predicted[i] && truth[i]) ++tp;
    else if (predicted[i]) ++fp;
    else if (truth[i]) ++fn;
  }
  return from_counts(tp, fp, fn);
}

MetricsReport token_f1(std::span<const std::string> predicted, std::span<const std::string> truth) {
  std::size_t tp = 0, fp = 0, fn = 0;
  count_overlap(predicted, truth, tp, fp, fn);
  return from_counts(tp, fp, fn);
}

MetricsReport token_f1(std::span<const std::vector<std::string>> predicted,
                       std::span<const std::vector<std::string>> truth) {
  if (predicted.size() != truth.size()) throw UsageError("token_f1: length mismatch");
  std::size_t tp = 0, fp = 0, fn = 0;
  for (std::size_t i = 0; i < predicted.size(); ++i) count_overlap(predicted[i], truth[i], tp, fp, fn);
  return from_counts(tp, fp, fn);
}

double compression_rate(std::uint64_t compressed_bytes, std::uint64_t original_bytes) {
  if (original_bytes == 0) throw UsageError("compression_rate: original size is zero");
  return static_cast<double>(compressed_bytes) / static_cast<double>(original_bytes);
}

std::string report_kv(const MetricsReport& r) {
  char buf[256];
  std::snprintf(buf, sizeof buf, "precision=%.6f\nrecall=%.6f\nf1=%.6f\ntp=%zu\nfp=%zu\nfn=%zu\n", r.precision,
                r.recall, r.f1, r.tp, r.fp, r.fn);
  return buf;
}

}  // namespace unilog::tasks
