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

#include <charconv>
#include <cstdio>
#include <map>
#include <sstream>

#include "unilog/model.hpp"

namespace unilog::model {

namespace {

int parse_int(const std::string& key, const std::string& value) {
  int out = 0;
  auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), out);
  if (ec != std::errc() || ptr != value.data() + value.size()) {
    throw DataError("model config: bad integer for " + key + ": '" + value + "'");
  }
  return out;
}

}  // namespace

void ModelConfig::validate() const {
  auto positive = [](int v, const char* name) {
    if (v <= 0) throw UsageError(std::string("model config: ") + name + " must be positive");
  };
  positive(n_blocks, "n_blocks");
  positive(n_heads, "n_heads");
  positive(d_head, "d_head");
  positive(d_model, "d_model");
  positive(d_ffn, "d_ffn");
  positive(max_len, "max_len");
  positive(vocab_size, "vocab_size");
  if (n_heads * d_head != d_model) throw UsageError("model config: n_heads * d_head must equal d_model");
  if (!(dropout >= 0.0 && dropout < 1.0)) throw UsageError("model config: dropout must be in [0, 1)");
  if (n_rel_buckets < 4 || n_rel_buckets % 2 != 0) {
    throw UsageError("model config: n_rel_buckets must be an even number >= 4");
  }
}

std::string ModelConfig::to_kv() const {
  // %.17g round-trips every double exactly.
  char drop[32];
  std::snprintf(drop, sizeof drop, "%.17g", dropout);
  std::ostringstream os;
  os << "n_blocks=" << n_blocks << '\n'
     << "n_heads=" << n_heads << '\n'
     << "d_head=" << d_head << '\n'
     << "d_model=" << d_model << '\n'
     << "d_ffn=" << d_ffn << '\n'
     << "dropout=" << drop << '\n'
     << "max_len=" << max_len << '\n'
     << "n_rel_buckets=" << n_rel_buckets << '\n'
     << "vocab_size=" << vocab_size << '\n';
  return os.str();
}

ModelConfig ModelConfig::from_kv(std::string_view text) {
  std::map<std::string, std::string> kv;
  std::istringstream is{std::string(text)};
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    auto eq = line.find('=');
    if (eq == std::string::npos) throw DataError("model config: malformed line '" + line + "'");
    kv[line.substr(0, eq)] = line.substr(eq + 1);
  }
  ModelConfig c;
  auto take = [&](const char* key) -> std::string {
    auto it = kv.find(key);
    if (it == kv.end()) throw DataError(std::string("model config: missing key ") + key);
    std::string v = it->second;
    kv.erase(it);
    return v;
  };
  c.n_blocks = parse_int("n_blocks", take("n_blocks"));
  c.n_heads = parse_int("n_heads", take("n_heads"));
  c.d_head = parse_int("d_head", take("d_head"));
  c.d_model = parse_int("d_model", take("d_model"));
  c.d_ffn = parse_int("d_ffn", take("d_ffn"));
  {
    std::string v = take("dropout");
    char* end = nullptr;
    c.dropout = std::strtod(v.c_str(), &end);
    if (end == v.c_str() || *end != '\0') throw DataError("model config: bad dropout '" + v + "'");
  }
  c.max_len = parse_int("max_len", take("max_len"));
  c.n_rel_buckets = parse_int("n_rel_buckets", take("n_rel_buckets"));
  c.vocab_size = parse_int("vocab_size", take("vocab_size"));
  if (!kv.empty()) throw DataError("model config: unknown key " + kv.begin()->first);
  try {
    c.validate();
  } catch (const UsageError& e) {
    throw DataError(e.what());
  }
  return c;
}

}  // namespace unilog::model
