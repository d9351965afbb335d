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

#include "unilog/compression.hpp"

namespace unilog::compression {

QuantizedPmf QuantizedPmf::from_probabilities(std::span<const double> probs, const std::vector<bool>& support) {
  if (probs.size() != support.size()) throw UsageError("pmf: probability and support sizes differ");
  std::vector<std::size_t> symbols;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    if (support[i]) symbols.push_back(i);
  }
  if (symbols.empty()) throw UsageError("pmf: empty support");
  if (symbols.size() > kPmfTotal) throw UsageError("pmf: support larger than the count total");

  auto clean = [](double p) { return std::isfinite(p) && p > 0.0 ? p : 0.0; };
  double sum = 0.0;
  for (std::size_t s : symbols) sum += clean(probs[s]);
  const std::uint32_t spare = kPmfTotal - static_cast<std::uint32_t>(symbols.size());

  std::vector<std::uint32_t> counts(probs.size(), 0);
  std::vector<double> rem(probs.size(), 0.0);
  std::uint64_t assigned = 0;
  for (std::size_t s : symbols) {
    const double share = sum > 0.0 ? clean(probs[s]) / sum : 1.0 / static_cast<double>(symbols.size());
    const double x = share * static_cast<double>(spare);
    const double base = std::min(std::floor(x), static_cast<double>(spare));
    counts[s] = 1 + static_cast<std::uint32_t>(base);
    rem[s] = x - base;
    assigned += static_cast<std::uint64_t>(base);
  }
  // Rounding can push the floors past the budget only by a hair; take the
  // excess back from the largest counts.
  while (assigned > spare) {
    auto it = std::max_element(symbols.begin(), symbols.end(),
                               [&](std::size_t a, std::size_t b) { return counts[a] < counts[b]; });
    --counts[*it];
    --assigned;
  }
  std::uint64_t leftover = spare - assigned;
  std::stable_sort(symbols.begin(), symbols.end(), [&](std::size_t a, std::size_t b) { return rem[a] > rem[b]; });
  for (std::size_t i = 0; leftover > 0; i = (i + 1) % symbols.size(), --leftover) ++counts[symbols[i]];
  return from_exact_counts(counts);
}

QuantizedPmf QuantizedPmf::uniform(std::size_t n) {
  const std::vector<double> p(n, 1.0);
  return from_probabilities(p, std::vector<bool>(n, true));
}

QuantizedPmf QuantizedPmf::from_counts(std::span<const std::uint64_t> counts) {
  std::vector<double> p(counts.size());
  std::vector<bool> support(counts.size());
  for (std::size_t i = 0; i < counts.size(); ++i) {
    p[i] = static_cast<double>(counts[i]);
    support[i] = counts[i] > 0;
  }
  return from_probabilities(p, support);
}

QuantizedPmf QuantizedPmf::from_exact_counts(std::span<const std::uint32_t> counts) {
  QuantizedPmf pmf;
  pmf.cum_.resize(counts.size() + 1, 0);
  std::uint64_t total = 0;
  for (std::size_t i = 0; i < counts.size(); ++i) {
    total += counts[i];
    if (total > kPmfTotal) break;
    pmf.cum_[i + 1] = static_cast<std::uint32_t>(total);
  }
  if (total != kPmfTotal) throw DataError("pmf: counts do not sum to the fixed total");
  return pmf;
}

std::size_t QuantizedPmf::find(std::uint32_t target) const {
  auto it = std::upper_bound(cum_.begin(), cum_.end(), target);
  if (it == cum_.begin() || it == cum_.end()) throw DataError("pmf: target outside the distribution");
  return static_cast<std::size_t>(it - cum_.begin()) - 1;
}

}  // namespace unilog::compression
