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
#include <iostream>
#include <map>
#include <sstream>

#include "unilog/tokenizer.hpp"

namespace unilog::tokenizer {

namespace {

constexpr std::string_view kVersionLine = "# unilog vocabulary v1";

std::string specials_line() {
  std::ostringstream os;
  os << "# specials pad=" << SpecialIds::kPad << " unk=" << SpecialIds::kUnk
     << " num=" << SpecialIds::kNum << " eos=" << SpecialIds::kEos << " bos=" << SpecialIds::kBos
     << " sentinels=" << SpecialIds::kFirstSentinel << "-" << (SpecialIds::kFirstTaskPrefix - 1);
  for (TaskKind t : kAllTasks) os << " " << task_name(t) << "=" << SpecialIds::task_prefix(t);
  return os.str();
}

}  // namespace

std::string_view task_name(TaskKind t) {
  switch (t) {
    case TaskKind::kAnomaly: return "anomaly";
    case TaskKind::kFailure: return "failure";
    case TaskKind::kSummarization: return "summarization";
    case TaskKind::kCompression: return "compression";
  }
  return "unknown";
}

std::string_view task_prefix_token(TaskKind t) {
  switch (t) {
    case TaskKind::kAnomaly: return "<anomaly>";
    case TaskKind::kFailure: return "<failure>";
    case TaskKind::kSummarization: return "<summarization>";
    case TaskKind::kCompression: return "<compression>";
  }
  return "<unknown>";
}

std::optional<TaskKind> parse_task(std::string_view name) {
  for (TaskKind t : kAllTasks) {
    if (task_name(t) == name) return t;
  }
  return std::nullopt;
}

std::optional<TaskKind> task_from_prefix_token(std::string_view token) {
  for (TaskKind t : kAllTasks) {
    if (task_prefix_token(t) == token) return t;
  }
  return std::nullopt;
}

Vocabulary::Vocabulary() {
  auto push = [this](std::string s) {
    token_to_id_.emplace(s, static_cast<TokenId>(id_to_token_.size()));
    id_to_token_.push_back(std::move(s));
  };
  push("<pad>");
  push("<unk>");
  push(std::string(kNumToken));
  push("</s>");
  push("<s>");
  for (std::size_t i = 0; i < kNumSentinels; ++i) push("<sentinel_" + std::to_string(i) + ">");
  for (TaskKind t : kAllTasks) push(std::string(task_prefix_token(t)));
}

std::optional<TokenId> Vocabulary::find(std::string_view token) const {
  auto it = token_to_id_.find(token);
  if (it == token_to_id_.end()) return std::nullopt;
  return it->second;
}

TokenId Vocabulary::id(std::string_view token) const { return find(token).value_or(SpecialIds::kUnk); }

const std::string& Vocabulary::token(TokenId id) const {
  if (id < 0 || static_cast<std::size_t>(id) >= id_to_token_.size()) {
    throw UsageError("token id " + std::to_string(id) + " out of range (vocabulary size " +
                     std::to_string(id_to_token_.size()) + ")");
  }
  return id_to_token_[static_cast<std::size_t>(id)];
}

std::vector<TokenId> Vocabulary::encode(std::span<const std::string> tokens) const {
  std::vector<TokenId> ids;
  ids.reserve(tokens.size());
  for (const auto& t : tokens) ids.push_back(id(t));
  return ids;
}

std::vector<std::string> Vocabulary::decode(std::span<const TokenId> ids) const {
  std::vector<std::string> out;
  out.reserve(ids.size());
  for (TokenId i : ids) out.push_back(token(i));
  return out;
}

TokenId Vocabulary::add(std::string_view token) {
  if (auto existing = find(token)) return *existing;
  const auto id = static_cast<TokenId>(id_to_token_.size());
  id_to_token_.emplace_back(token);
  token_to_id_.emplace(std::string(token), id);
  return id;
}

std::string Vocabulary::serialize() const {
  std::string out;
  out += kVersionLine;
  out += '\n';
  out += specials_line();
  out += '\n';
  for (std::size_t i = 0; i < id_to_token_.size(); ++i) {
    out += id_to_token_[i];
    out += '\t';
    out += std::to_string(i);
    out += '\n';
  }
  return out;
}

Vocabulary Vocabulary::parse(std::string_view text) {
  std::vector<std::string_view> lines;
  std::size_t start = 0;
  while (start < text.size()) {
    std::size_t end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    lines.push_back(text.substr(start, end - start));
    start = end + 1;
  }
  if (lines.size() < 2 || lines[0] != kVersionLine) throw DataError("not a unilog vocabulary (v1) file");
  if (lines[1] != specials_line()) throw DataError("vocabulary special-id layout does not match this build");

  Vocabulary vocab;
  for (std::size_t i = 2; i < lines.size(); ++i) {
    const auto line = lines[i];
    const auto tab = line.rfind('\t');
    if (tab == std::string_view::npos) throw DataError("vocabulary line " + std::to_string(i + 1) + ": missing tab");
    const std::string_view tok = line.substr(0, tab);
    const std::string id_text(line.substr(tab + 1));
    std::size_t expected = i - 2;
    if (id_text != std::to_string(expected)) {
      throw DataError("vocabulary line " + std::to_string(i + 1) + ": expected id " + std::to_string(expected));
    }
    if (expected < vocab.size()) {
      if (vocab.id_to_token_[expected] != tok) {
        throw DataError("vocabulary line " + std::to_string(i + 1) + ": special token mismatch");
      }
      continue;
    }
    if (vocab.find(tok)) throw DataError("vocabulary line " + std::to_string(i + 1) + ": duplicate token");
    vocab.add(tok);
  }
  return vocab;
}

void Vocabulary::save(const std::filesystem::path& path) const {
  const std::string s = serialize();
  write_file(path, std::span(reinterpret_cast<const std::uint8_t*>(s.data()), s.size()));
}

Vocabulary Vocabulary::load(const std::filesystem::path& path) {
  auto bytes = read_file(path);
  return parse(std::string_view(reinterpret_cast<const char*>(bytes.data()), bytes.size()));
}

Vocabulary build_vocab(std::span<const std::vector<std::string>> corpus, std::size_t min_count) {
  if (min_count < 1) throw UsageError("build_vocab: min_count must be >= 1");
  Vocabulary vocab;
  std::map<std::string, std::size_t> counts;
  for (const auto& seq : corpus) {
    for (const auto& t : seq) {
      if (vocab.find(t)) continue;  // special surface forms keep their reserved ids
      ++counts[t];
    }
  }
  if (counts.empty()) std::cerr << "warning: empty corpus; vocabulary holds only special tokens\n";
  std::vector<std::pair<std::string, std::size_t>> sorted(counts.begin(), counts.end());
  std::stable_sort(sorted.begin(), sorted.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });
  for (const auto& [tok, n] : sorted) {
    if (n >= min_count) vocab.add(tok);
  }
  return vocab;
}

TokenSequence make_sequence(std::string_view raw, const Vocabulary& vocab, const UnigramTable& table) {
  TokenSequence seq;
  seq.tokens = tokenize(raw, table);
  seq.ids = vocab.encode(seq.tokens);
  return seq;
}

}  // namespace unilog::tokenizer
