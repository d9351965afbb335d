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

#include "unilog/tokenizer.hpp"
#include "unilog/training.hpp"

namespace unilog::training {

using tokenizer::SpecialIds;

namespace {

// Replaces every masked position with its own sentinel, numbered in order.
MaskedExample finish(std::span<const TokenId> ids, const std::vector<bool>& masked) {
  MaskedExample ex;
  ex.target_ids.assign(ids.begin(), ids.end());
  ex.input_ids.assign(ids.begin(), ids.end());
  std::size_t k = 0;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (!masked[i]) continue;
    ex.input_ids[i] = SpecialIds::sentinel(k++);
    ex.mask_positions.push_back(i);
  }
  return ex;
}

// First index of a span of `length` anchored at `anchor`, moved back so it
// ends at the anchor when it would overrun the sequence.
std::size_t span_start(std::size_t n, std::size_t anchor, std::size_t length) {
  return anchor + length > n ? anchor + 1 - length : anchor;
}

bool span_fits(const std::vector<bool>& masked, std::size_t start, std::size_t length) {
  const std::size_t n = masked.size();
  if (start + length > n) return false;
  const std::size_t lo = start > 0 ? start - 1 : start;
  const std::size_t hi = std::min(n, start + length + 1);
  for (std::size_t i = lo; i < hi; ++i) {
    if (masked[i]) return false;
  }
  return true;
}

bool any_span_fits(const std::vector<bool>& masked) {
  for (std::size_t s = 0; s + 2 <= masked.size(); ++s) {
    if (span_fits(masked, s, 2)) return true;
  }
  return false;
}

}  // namespace

MaskedExample bert_mask(std::span<const TokenId> ids, double rate, Rng& rng, double corrupt_rate,
                        TokenId vocab_size) {
  if (ids.empty()) throw UsageError("bert_mask: empty sequence");
  std::vector<bool> masked(ids.size(), false);
  for (std::size_t i = 0; i < ids.size(); ++i) masked[i] = rng.uniform() < rate;
  MaskedExample ex = finish(ids, masked);
  const bool can_corrupt = corrupt_rate > 0.0 && vocab_size > SpecialIds::kFirstRegular;
  if (can_corrupt) {
    const auto n_regular = static_cast<std::uint64_t>(vocab_size - SpecialIds::kFirstRegular);
    for (std::size_t p : ex.mask_positions) {
      if (rng.uniform() < corrupt_rate) {
        ex.input_ids[p] = SpecialIds::kFirstRegular + static_cast<TokenId>(rng.uniform_int(n_regular));
      }
    }
  }
  return ex;
}

MaskedExample apply_span(std::span<const TokenId> ids, std::size_t anchor, std::size_t length) {
  const std::size_t n = ids.size();
  if (anchor >= n || length == 0 || length > n) throw UsageError("apply_span: span outside sequence");
  std::vector<bool> masked(n, false);
  const std::size_t start = span_start(n, anchor, length);
  for (std::size_t i = start; i < start + length; ++i) masked[i] = true;
  return finish(ids, masked);
}

MaskedExample span_mask(std::span<const TokenId> ids, double budget, Rng& rng) {
  const std::size_t n = ids.size();
  if (n < 4) return bert_mask(ids, budget, rng);
  std::vector<bool> masked(n, false);
  std::size_t count = 0;
  const auto need = static_cast<std::size_t>(std::ceil(budget * static_cast<double>(n) - 1e-9));
  constexpr int kMaxRedraws = 64;
  while (count < need && any_span_fits(masked)) {
    bool placed = false;
    for (int attempt = 0; attempt < kMaxRedraws && !placed; ++attempt) {
      std::size_t anchor = 0;
      double best = -1.0;
      for (std::size_t i = 0; i < n; ++i) {
        if (masked[i]) continue;
        const double u = rng.uniform();
        if (u > best) {
          best = u;
          anchor = i;
        }
      }
      const std::size_t length = 2 + rng.uniform_int(2);
      const std::size_t start = span_start(n, anchor, length);
      if (!span_fits(masked, start, length)) continue;
      for (std::size_t i = start; i < start + length; ++i) masked[i] = true;
      count += length;
      placed = true;
    }
    if (!placed) break;
  }
  return finish(ids, masked);
}

PrefixSplit prefix_lm_example(std::span<const TokenId> ids, double split) {
  if (ids.size() < 2) throw UsageError("prefix_lm_example: need at least 2 tokens");
  const double len = static_cast<double>(ids.size());
  auto k = static_cast<std::size_t>(std::max(0.0, std::ceil(split * len - 1e-9)));
  k = std::clamp<std::size_t>(k, 1, ids.size() - 1);
  PrefixSplit out;
  out.input.assign(ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(k));
  out.target.assign(ids.begin() + static_cast<std::ptrdiff_t>(k), ids.end());
  return out;
}

double loss_reconstruction_l2(const Matrix& pred_embedding, const Matrix& target_embedding) {
  if (pred_embedding.rows() != target_embedding.rows() || pred_embedding.cols() != target_embedding.cols()) {
    throw UsageError("loss_reconstruction_l2: shape mismatch");
  }
  if (pred_embedding.size() == 0) return 0.0;
  return (pred_embedding - target_embedding).squaredNorm() / static_cast<double>(pred_embedding.size());
}

}  // namespace unilog::training
