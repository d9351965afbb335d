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

#pragma once

#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace unilog {

using TokenId = std::int32_t;

// The four downstream tasks; each has a reserved prefix token and a head.
enum class TaskKind { kAnomaly, kFailure, kSummarization, kCompression };

inline constexpr TaskKind kAllTasks[] = {TaskKind::kAnomaly, TaskKind::kFailure,
                                         TaskKind::kSummarization, TaskKind::kCompression};

// Bad input data, corrupt files, or an incompatible model. Mapped to exit
// code 2 by the command-line tool.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Caller misuse: invalid arguments or violated preconditions.
class UsageError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Seeded random stream. Wraps mt19937_64 with distribution code of our own so
// that a seed produces the same values with every standard library.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 42) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  // Uniform in [0, 1) with 53 random bits.
  double uniform() {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  }

  // Uniform integer in [0, n). n must be positive.
  std::uint64_t uniform_int(std::uint64_t n);

  bool bernoulli(double p) { return uniform() < p; }

  // Standard normal via Box-Muller; the spare value is cached.
  double normal();

  // Derives an independent stream, used to hand sub-tasks their own seeds.
  Rng fork() { return Rng(engine_() ^ 0x9e3779b97f4a7c15ULL); }

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

template <typename T>
void shuffle(std::vector<T>& v, Rng& rng) {
  for (std::size_t i = v.size(); i > 1; --i) {
    std::size_t j = rng.uniform_int(i);
    std::swap(v[i - 1], v[j]);
  }
}

}  // namespace unilog
